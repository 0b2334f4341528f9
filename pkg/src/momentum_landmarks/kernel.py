"""Green's functions of ``L = (I - a^2 Laplacian)^b`` in the plane.

The radial kernel is

    G(r) = 2^(n/2 - b) / ((2 pi a)^(n/2) a^b Gamma(b)) * r^(b - n/2) * K_{b - n/2}(r / a)

with ``K`` the modified Bessel function of the second kind.  For ``n = 2`` and
``b = 3/2`` it collapses to the conic kernel ``exp(-r / a) / (2 pi a^2)``, which
is evaluated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DegenerateRadiusError, KernelError

__all__ = [
    "KernelSpec",
    "CONIC",
    "green_value",
    "green_derivative",
    "gram_matrix",
    "pairwise_distances",
]


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of the Green's kernel.

    Attributes
    ----------
    a : float
        Length scale, in landmark coordinate units.
    b : float
        Smoothness order of the operator, ``b >= 1``.
    n : int
        Spatial dimension. Only ``n = 2`` is supported.
    r_cutoff : float
        Coincidence radius, as a fraction of ``a``. Pairwise forces between
        particles closer than ``r_cutoff * a`` are treated as zero.
    """

    a: float = 1.0
    b: float = 1.5
    n: int = 2
    r_cutoff: float = 1e-9

    def __post_init__(self):
        if not (np.isfinite(self.a) and self.a > 0):
            raise KernelError(f"kernel scale a must be positive, got {self.a!r}")
        if not (np.isfinite(self.b) and self.b >= 1):
            raise KernelError(f"kernel order b must be >= 1, got {self.b!r}")
        if self.n != 2:
            raise KernelError(f"only planar kernels (n=2) are supported, got n={self.n!r}")
        if not (0 <= self.r_cutoff < 1e-3):
            raise KernelError(f"r_cutoff must lie in [0, 1e-3), got {self.r_cutoff!r}")

    @property
    def is_conic(self) -> bool:
        return self.b == 1.5

    @property
    def order(self) -> float:
        """Bessel order ``b - n/2``."""
        return self.b - self.n / 2

    @property
    def cutoff(self) -> float:
        """Absolute coincidence radius."""
        return self.r_cutoff * self.a

    @property
    def prefactor(self) -> float:
        n, a, b = self.n, self.a, self.b
        return 2.0 ** (n / 2 - b) / ((2 * math.pi * a) ** (n / 2) * a**b * math.gamma(b))

    @property
    def value_at_zero(self) -> float:
        """Limit of ``G(r)`` as ``r -> 0``."""
        if self.is_conic:
            return 1.0 / (2 * math.pi * self.a**2)
        nu = self.order
        if nu <= 0:
            return math.inf
        # r^nu K_nu(r/a) -> Gamma(nu) 2^(nu-1) a^nu
        return self.prefactor * math.gamma(nu) * 2.0 ** (nu - 1) * self.a**nu

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "n": self.n, "r_cutoff": self.r_cutoff}


CONIC = KernelSpec()


def _check_finite(values, what):
    if not np.all(np.isfinite(values)):
        raise KernelError(f"{what} evaluation produced non-finite values")
    return values


def green_value(r, spec: KernelSpec = CONIC):
    """Evaluate ``G(r)``; ``r`` may be a scalar or an array of radii."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise KernelError("radii must be finite and non-negative")
    a = spec.a
    if spec.is_conic:
        out = np.exp(-r / a) / (2 * math.pi * a * a)
        return out if out.ndim else float(out)

    nu = spec.order
    zero = r == 0
    if np.any(zero) and nu <= 0:
        raise KernelError(f"G(0) is unbounded for b={spec.b} (b must exceed n/2)")
    z = np.where(zero, 1.0, r) / a
    with np.errstate(over="ignore", under="ignore"):
        # kve keeps the scaled Bessel factor finite; the exponential underflows to 0
        out = spec.prefactor * np.where(zero, 1.0, r) ** nu * special.kve(nu, z) * np.exp(-z)
    out = np.where(zero, spec.value_at_zero, out)
    _check_finite(out, "Green's function")
    return out if out.ndim else float(out)


def green_derivative(r, spec: KernelSpec = CONIC):
    """Radial derivative ``dG/dr``.

    Raises
    ------
    DegenerateRadiusError
        If any radius is at or below ``spec.cutoff``; the force direction is
        undefined there and callers must drop the pairwise term.
    """
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise KernelError("radii must be finite")
    if np.any(r <= spec.cutoff):
        raise DegenerateRadiusError(
            f"radius at or below the coincidence cutoff {spec.cutoff:g}"
        )
    out = _derivative_unchecked(r, spec)
    _check_finite(out, "Green's derivative")
    return out if out.ndim else float(out)


def _derivative_unchecked(r, spec):
    a = spec.a
    if spec.is_conic:
        return -np.exp(-r / a) / (2 * math.pi * a**3)
    nu = spec.order
    z = r / a
    # d/dr [r^nu K_nu(r/a)] = -r^nu K_{nu-1}(r/a) / a
    with np.errstate(over="ignore", under="ignore"):
        return -spec.prefactor * r**nu * special.kve(nu - 1, z) * np.exp(-z) / a


def pairwise_distances(points):
    points = np.asarray(points, dtype=float)
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def gram_matrix(points, spec: KernelSpec = CONIC) -> np.ndarray:
    """Kernel matrix ``G_ij = G(|q_i - q_j|)`` over an ``(N, 2)`` configuration."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] != 2:
        raise KernelError(f"expected an (N, 2) array of points, got shape {points.shape}")
    if not np.all(np.isfinite(points)):
        raise KernelError("landmark positions must be finite")
    gram = np.asarray(green_value(pairwise_distances(points), spec), dtype=float)
    # exact symmetry regardless of rounding in the distance computation
    return np.triu(gram) + np.triu(gram, 1).T
