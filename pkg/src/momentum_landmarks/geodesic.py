"""Landmark particle dynamics: the Exp map and related quantities.

Each landmark ``q_i`` carries a momentum ``p_i``; the pair evolves as

    dq_i/dt =  sum_j G(|q_i - q_j|) p_j
    dp_i/dt = -sum_{j != i} (p_i . p_j) G'(|q_i - q_j|) (q_i - q_j) / |q_i - q_j|

on ``t in [0, 1]``.  Integrating from a template with a given momentum
yields the deformed template at ``t = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import _particles
from .errors import ConversionError, DivergenceError
from .kernel import CONIC, KernelSpec, _derivative_unchecked, gram_matrix, green_value

__all__ = [
    "LandmarkTemplate",
    "MomentumField",
    "GeodesicTrajectory",
    "GramFactor",
    "evolve",
    "exp_map",
    "velocity_field",
    "momentum_to_velocity",
    "velocity_to_momentum",
    "hamiltonian",
    "sobolev_norm_sq",
    "distance_estimate",
    "rms_distance",
]

DEFAULT_STEPS = 20
MAX_CONDITION = 1e12


def _as_points(values, name="points"):
    arr = np.array(values, dtype=float)
    if arr.ndim == 1 and arr.shape == (2,):
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError(f"{name} must be an (N, 2) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class LandmarkTemplate:
    """An ordered set of planar landmarks; row ``i`` corresponds across templates."""

    points: np.ndarray
    label: str | None = None

    def __post_init__(self):
        pts = _as_points(self.points)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n_landmarks(self) -> int:
        return self.points.shape[0]

    def diameter(self) -> float:
        diff = self.points[:, None, :] - self.points[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max())

    def __eq__(self, other):
        if not isinstance(other, LandmarkTemplate):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.points, other.points)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class MomentumField:
    """Momentum covectors attached to the landmarks of ``base``."""

    momenta: np.ndarray
    base: LandmarkTemplate

    def __post_init__(self):
        mom = _as_points(self.momenta, "momenta")
        if mom.shape != self.base.points.shape:
            raise ValueError(
                f"momenta shape {mom.shape} does not match base shape {self.base.points.shape}"
            )
        mom.flags.writeable = False
        object.__setattr__(self, "momenta", mom)


@dataclass(frozen=True)
class GeodesicTrajectory:
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    hamiltonian_samples: np.ndarray = field(repr=False)

    @property
    def endpoint(self) -> np.ndarray:
        return self.q[-1]

    def max_relative_drift(self, floor: float = 1e-12) -> float:
        h0 = self.hamiltonian_samples[0]
        return float(np.max(np.abs(self.hamiltonian_samples - h0)) / max(abs(h0), floor))


def _general_rhs(q, p, spec):
    diff = q[:, None, :] - q[None, :, :]
    r = np.sqrt((diff**2).sum(-1))
    dq = np.asarray(green_value(r, spec)) @ p
    pair = r > spec.cutoff
    scaled = np.zeros_like(r)
    scaled[pair] = _derivative_unchecked(r[pair], spec) / r[pair]
    coef = -(p @ p.T) * scaled
    dp = np.einsum("ij,ijk->ik", coef, diff)
    return dq, dp


def _general_rk4(q0, p0, spec, steps):
    dt = 1.0 / steps
    qs = np.empty((steps + 1,) + q0.shape)
    ps = np.empty_like(qs)
    qs[0], ps[0] = q0, p0
    for s in range(steps):
        q, p = qs[s], ps[s]
        k1q, k1p = _general_rhs(q, p, spec)
        k2q, k2p = _general_rhs(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p, spec)
        k3q, k3p = _general_rhs(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p, spec)
        k4q, k4p = _general_rhs(q + dt * k3q, p + dt * k3p, spec)
        qs[s + 1] = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        ps[s + 1] = p + dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        if not (np.all(np.isfinite(qs[s + 1])) and np.all(np.isfinite(ps[s + 1]))):
            return qs, ps, s + 1
    return qs, ps, -1


def _integrate(q0, p0, spec, steps):
    if steps < 1:
        raise ValueError("steps must be a positive integer")
    q0 = np.ascontiguousarray(q0, dtype=float)
    p0 = np.ascontiguousarray(p0, dtype=float)
    if q0.shape != p0.shape:
        raise ValueError(f"position shape {q0.shape} != momentum shape {p0.shape}")
    if spec.is_conic:
        qs, ps, failed = _particles.conic_rk4(q0, p0, spec.a, spec.cutoff, int(steps))
    else:
        qs, ps, failed = _general_rk4(q0, p0, spec, int(steps))
    if failed >= 0:
        t = failed / steps
        raise DivergenceError(f"particle system diverged at t={t:.6g}", time=t)
    return qs, ps


def _endpoint(q0, p0, spec, steps):
    return _integrate(q0, p0, spec, steps)[0][-1]


def evolve(q0, p0, spec: KernelSpec = CONIC, steps: int = DEFAULT_STEPS) -> GeodesicTrajectory:
    """Integrate the particle system with classical RK4 on a uniform grid over [0, 1]."""
    q0 = _as_points(q0, "q0")
    p0 = _as_points(p0, "p0")
    qs, ps = _integrate(q0, p0, spec, steps)
    if spec.is_conic:
        hs = _particles.conic_hamiltonians(qs, ps, spec.a)
    else:
        hs = np.array([hamiltonian(q, p, spec) for q, p in zip(qs, ps)])
    times = np.linspace(0.0, 1.0, steps + 1)
    return GeodesicTrajectory(times=times, q=qs, p=ps, hamiltonian_samples=hs)


def _momentum_array(base, momentum):
    if isinstance(momentum, MomentumField):
        if momentum.base is not base and not np.array_equal(momentum.base.points, base.points):
            raise ValueError("momentum field is attached to a different base template")
        return momentum.momenta
    return _as_points(momentum, "momentum")


def exp_map(base: LandmarkTemplate, momentum, spec: KernelSpec = CONIC,
            steps: int = DEFAULT_STEPS) -> LandmarkTemplate:
    """Deformed template at ``t = 1`` when shooting ``base`` with ``momentum``."""
    p0 = _momentum_array(base, momentum)
    return LandmarkTemplate(_endpoint(base.points, p0, spec, steps), label=base.label)


def velocity_field(q, p, x, spec: KernelSpec = CONIC):
    """Velocity ``u(x) = sum_j G(|x - q_j|) p_j`` at one point or an (M, 2) batch."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xs = np.atleast_2d(x)
    r = np.sqrt(((xs[:, None, :] - q[None, :, :]) ** 2).sum(-1))
    u = np.asarray(green_value(r, spec)) @ p
    return u[0] if single else u


class GramFactor:
    """Cholesky factor of a configuration's Gram matrix, reused across solves.

    The factorization is retried with diagonal jitter ``1e-12 * G(0) * 2**k``
    (``k <= 8``) when the plain matrix is not numerically positive definite.
    """

    def __init__(self, q, spec: KernelSpec = CONIC, max_condition: float = MAX_CONDITION):
        self.gram = gram_matrix(q, spec)
        n = self.gram.shape[0]
        g0 = spec.value_at_zero
        jitter = 0.0
        factor = None
        for k in range(-1, 9):
            jitter = 0.0 if k < 0 else 1e-12 * g0 * 2.0**k
            try:
                factor = linalg.cho_factor(self.gram + jitter * np.eye(n), lower=True)
                break
            except linalg.LinAlgError:
                continue
        if factor is None:
            raise ConversionError(
                "Gram matrix is not positive definite even after jitter", condition=math.inf
            )
        eig = np.linalg.eigvalsh(self.gram + jitter * np.eye(n))
        condition = float(eig[-1] / eig[0]) if eig[0] > 0 else math.inf
        if condition > max_condition:
            raise ConversionError(
                f"Gram matrix is ill-conditioned (condition estimate {condition:.3g}); "
                "landmarks may coincide",
                condition=condition,
            )
        self.jitter = jitter
        self.condition = condition
        self._factor = factor

    def solve(self, u):
        return linalg.cho_solve(self._factor, np.asarray(u, dtype=float))


def momentum_to_velocity(q, p, spec: KernelSpec = CONIC) -> np.ndarray:
    """Nodal velocities ``u_i = sum_j G_ij p_j``."""
    return gram_matrix(q, spec) @ np.asarray(p, dtype=float)


def velocity_to_momentum(q, u, spec: KernelSpec = CONIC) -> np.ndarray:
    """Solve ``G p = u`` coordinate-wise for the momenta."""
    return GramFactor(q, spec).solve(u)


def hamiltonian(q, p, spec: KernelSpec = CONIC) -> float:
    """``H = 1/2 sum_ij (p_i . p_j) G(|q_i - q_j|)``, diagonal terms included."""
    p = np.asarray(p, dtype=float)
    return 0.5 * float(np.sum(gram_matrix(q, spec) * (p @ p.T)))


def sobolev_norm_sq(q, p, spec: KernelSpec = CONIC) -> float:
    """Squared tangent norm ``||u||_L^2 = sum_ij (p_i . p_j) G_ij``, i.e. ``2 H``."""
    p = np.asarray(p, dtype=float)
    return float(np.sum(gram_matrix(q, spec) * (p @ p.T)))


def distance_estimate(q, p, spec: KernelSpec = CONIC) -> float:
    """First-order geodesic distance: the tangent norm of the Log-map momentum."""
    return math.sqrt(max(sobolev_norm_sq(q, p, spec), 0.0))


def rms_distance(a, b) -> float:
    """Root-mean-square of per-landmark Euclidean discrepancies."""
    a = a.points if isinstance(a, LandmarkTemplate) else np.asarray(a, dtype=float)
    b = b.points if isinstance(b, LandmarkTemplate) else np.asarray(b, dtype=float)
    return float(np.sqrt(np.mean(np.sum((a - b) ** 2, axis=-1))))
