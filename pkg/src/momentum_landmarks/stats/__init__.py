"""Detection statistics over residual momenta."""

from .detect import DetectionReport, StatOptions, cell_index, detect, select_predictor
from .posterior import (
    HYPER_NAMES,
    THETA_NAMES,
    HyperConfig,
    MCMCOptions,
    ModelParameters,
    PosteriorDraws,
    chain_generator,
    fit_cells,
    fit_posterior,
    gelman_rubin,
)
from .predictive import (
    GridOptions,
    PredictiveSummary,
    hpd_contour,
    interval_box,
    marginal_interval,
    overlap_ratio_boxes,
    polygon_area,
    predictive_draws,
    summarize,
)
from .samples import LandmarkSampleMatrix, build_sample_matrices, flag_large_norms, mean_momentum_norm

__all__ = [
    "DetectionReport", "StatOptions", "cell_index", "detect", "select_predictor",
    "HYPER_NAMES", "THETA_NAMES", "HyperConfig", "MCMCOptions", "ModelParameters",
    "PosteriorDraws", "chain_generator", "fit_cells", "fit_posterior", "gelman_rubin",
    "GridOptions", "PredictiveSummary", "hpd_contour", "interval_box", "marginal_interval",
    "overlap_ratio_boxes", "polygon_area", "predictive_draws", "summarize",
    "LandmarkSampleMatrix", "build_sample_matrices", "flag_large_norms", "mean_momentum_norm",
]
