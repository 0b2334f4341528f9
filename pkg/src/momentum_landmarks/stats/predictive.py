"""Posterior-predictive sampling, interval boxes and highest-density contours."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage import measure

from ..errors import ContourError
from .posterior import PosteriorDraws

__all__ = [
    "GridOptions",
    "PredictiveSummary",
    "predictive_draws",
    "marginal_interval",
    "interval_box",
    "overlap_ratio_boxes",
    "hpd_contour",
    "polygon_area",
    "summarize",
]

MIN_CONTOUR_DRAWS = 100


@dataclass(frozen=True)
class GridOptions:
    """KDE grid: ``size`` nodes per axis, padding in bandwidths, bandwidth scale factor."""

    size: int = 256
    pad: float = 3.0
    bandwidth_scale: float = 1.0

    def to_dict(self) -> dict:
        return {"size": self.size, "pad": self.pad, "bandwidth_scale": self.bandwidth_scale}


@dataclass
class PredictiveSummary:
    predictive_draws: np.ndarray
    x_interval: tuple
    y_interval: tuple
    contour: np.ndarray | None = field(default=None)

    @property
    def box(self) -> tuple:
        return (self.x_interval, self.y_interval)


def predictive_draws(posterior: PosteriorDraws, count: int | None = None,
                     seed: int | np.random.Generator = 0) -> np.ndarray:
    """Bivariate-normal variates, one per retained parameter draw.

    With ``count`` set, parameter draws are cycled in pooled order until
    ``count`` variates have been produced.
    """
    theta = posterior.flat
    n = theta.shape[0] if count is None else int(count)
    if n < 1:
        raise ValueError("count must be positive")
    idx = np.arange(n) % theta.shape[0]
    mu_x, mu_y, sx, sy, rho = theta[idx].T
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((n, 2))
    x = mu_x + sx * z[:, 0]
    y = mu_y + sy * (rho * z[:, 0] + np.sqrt(1 - rho * rho) * z[:, 1])
    return np.column_stack([x, y])


def marginal_interval(draws, level: float = 0.95) -> tuple:
    """Central interval from linearly interpolated empirical quantiles."""
    draws = np.asarray(draws, dtype=float).ravel()
    if draws.size == 0:
        raise ValueError("no draws")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    tail = (1 - level) / 2
    lo, hi = np.quantile(draws, [tail, 1 - tail], method="linear")
    return float(lo), float(hi)


def interval_box(sample, level: float = 0.95) -> tuple:
    sample = np.asarray(sample, dtype=float)
    return marginal_interval(sample[:, 0], level), marginal_interval(sample[:, 1], level)


def overlap_ratio_boxes(box_a, box_b) -> float:
    """Intersection-over-union of two axis-aligned boxes ``((x0, x1), (y0, y1))``."""
    (ax0, ax1), (ay0, ay1) = box_a
    (bx0, bx1), (by0, by1) = box_b
    for lo, hi in ((ax0, ax1), (ay0, ay1), (bx0, bx1), (by0, by1)):
        if hi < lo:
            raise ValueError("box intervals must be ordered")
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    if union <= 0:
        # two degenerate boxes: identical ones overlap completely
        return 1.0 if tuple(map(tuple, box_a)) == tuple(map(tuple, box_b)) else 0.0
    return float(inter / union)


def polygon_area(poly) -> float:
    """Unsigned shoelace area; the polygon may be closed or open."""
    poly = np.asarray(poly, dtype=float)
    x, y = poly[:, 0], poly[:, 1]
    return float(0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _silverman(sample):
    n = sample.shape[0]
    sd = sample.std(axis=0, ddof=1)
    # bivariate normal-reference rule: (4 / (d + 2))^(1/(d+4)) = 1 for d = 2
    return sd * n ** (-1.0 / 6.0)


def hpd_contour(sample, level: float = 0.95, grid: GridOptions | None = None) -> np.ndarray:
    """Closed polygon bounding the highest-density region of given mass.

    The density is a Gaussian-kernel estimate evaluated on a regular grid by
    binning and smoothing.  Returns an ``(k, 2)`` array whose last vertex
    repeats the first.

    Raises
    ------
    ContourError
        With fewer than 100 draws or a degenerate sample.
    """
    grid = grid or GridOptions()
    sample = np.asarray(sample, dtype=float)
    if sample.ndim != 2 or sample.shape[1] != 2:
        raise ValueError("sample must have shape (n, 2)")
    if sample.shape[0] < MIN_CONTOUR_DRAWS:
        raise ContourError(f"need at least {MIN_CONTOUR_DRAWS} draws, got {sample.shape[0]}")
    h = _silverman(sample) * grid.bandwidth_scale
    if not np.all(h > 0):
        raise ContourError("sample has zero spread along an axis")
    lo = sample.min(axis=0) - grid.pad * h
    hi = sample.max(axis=0) + grid.pad * h
    size = grid.size
    step = (hi - lo) / (size - 1)
    # bins centred on grid nodes
    edges = [np.linspace(lo[k] - step[k] / 2, hi[k] + step[k] / 2, size + 1) for k in range(2)]
    counts, _, _ = np.histogram2d(sample[:, 0], sample[:, 1], bins=edges)
    dens = ndimage.gaussian_filter(counts, sigma=h / step, mode="constant", truncate=4.0)
    dens /= dens.sum()

    flat = np.sort(dens.ravel())[::-1]
    cum = np.cumsum(flat)
    k = int(np.searchsorted(cum, level))
    threshold = flat[min(k, flat.size - 1)]
    contours = measure.find_contours(dens, threshold)
    if not contours:
        raise ContourError("no contour found at the requested level")
    best = max(contours, key=polygon_area)
    poly = lo + best * step
    if not np.array_equal(poly[0], poly[-1]):
        poly = np.vstack([poly, poly[:1]])
    return poly


def summarize(posterior: PosteriorDraws, count: int | None = None, seed=0, level: float = 0.95,
              grid: GridOptions | None = None, contour: bool = True) -> PredictiveSummary:
    sample = predictive_draws(posterior, count, seed)
    xi, yi = interval_box(sample, level)
    poly = hpd_contour(sample, level, grid) if contour else None
    return PredictiveSummary(sample, xi, yi, poly)
