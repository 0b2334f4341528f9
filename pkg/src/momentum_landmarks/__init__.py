"""Landmark shape averaging and group comparison in momentum coordinates.

Templates are deformed along geodesics of a landmark particle system driven
by a Bessel-potential Green's kernel.  Initial momenta found by shooting give
linear coordinates in which groups are averaged and compared.
"""

from .averaging import AverageResult, WeightScheme, compute_weights, group_average, initial_guess, objective
from .errors import (
    AveragingError,
    ContourError,
    ConversionError,
    DegenerateRadiusError,
    DivergenceError,
    FitError,
    IngestionError,
    KernelError,
    LandmarkError,
    ShootingError,
)
from .geodesic import (
    GeodesicTrajectory,
    GramFactor,
    LandmarkTemplate,
    MomentumField,
    distance_estimate,
    evolve,
    exp_map,
    hamiltonian,
    momentum_to_velocity,
    rms_distance,
    sobolev_norm_sq,
    velocity_field,
    velocity_to_momentum,
)
from .io import read_group, read_templates, synth_ellipse, synth_group, synth_heart, synth_planted_shift, write_group, write_templates
from .kernel import CONIC, KernelSpec, gram_matrix, green_derivative, green_value, pairwise_distances
from .shooting import ShootingOptions, ShootingResult, log_map

__version__ = "0.1.0"
