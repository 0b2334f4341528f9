"""Group averages on the momentum field.

Each outer iteration matches the current average to every member, averages
the resulting momenta with a weight scheme and shoots the average forward
along the mean momentum.  Equal weights target the least sum of squared
geodesic distances; inverse-distance weights (a Weiszfeld-type update)
target the least sum of distances.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AveragingError, ShootingError
from .geodesic import (
    GramFactor,
    LandmarkTemplate,
    MomentumField,
    exp_map,
    momentum_to_velocity,
    sobolev_norm_sq,
)
from .kernel import CONIC, KernelSpec
from .shooting import ShootingOptions, log_map

__all__ = [
    "WeightScheme",
    "AverageResult",
    "compute_weights",
    "objective",
    "group_average",
    "initial_guess",
]

SCHEMES = ("equal", "robust")
# relative slack on objective increases; covers round-off in the summed distances
DESCENT_RTOL = 1e-10


@dataclass(frozen=True)
class WeightScheme:
    """``equal`` (Karcher-type mean) or ``robust`` (geometric-median-type)."""

    kind: str = "equal"
    epsilon_d: float = 1e-9

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"weight scheme must be one of {SCHEMES}, got {self.kind!r}")
        if not self.epsilon_d > 0:
            raise ValueError("epsilon_d must be positive")


@dataclass
class AverageResult:
    average: LandmarkTemplate
    residual_momenta: list
    objective_history: np.ndarray
    iterations: int
    converged: bool
    weights: np.ndarray
    distances: np.ndarray
    mean_momentum_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    backtracks: int = 0

    @property
    def residual_array(self) -> np.ndarray:
        """Residual momenta stacked as an ``(m, N, 2)`` array."""
        return np.stack([mf.momenta for mf in self.residual_momenta])


def _fsum(stack):
    """Correctly rounded sum over the first axis, independent of member order."""
    stack = np.asarray(stack, dtype=float)
    flat = stack.reshape(stack.shape[0], -1)
    return np.array([math.fsum(col) for col in flat.T]).reshape(stack.shape[1:])


def compute_weights(scheme: WeightScheme, norms) -> np.ndarray:
    norms = np.asarray(norms, dtype=float)
    if norms.ndim != 1 or norms.size == 0:
        raise ValueError("norms must be a non-empty 1-D sequence")
    if np.any(norms < 0) or not np.all(np.isfinite(norms)):
        raise ValueError("tangent norms must be finite and non-negative")
    m = norms.size
    if scheme.kind == "equal":
        return np.full(m, 1.0 / m)
    inv = 1.0 / np.maximum(norms, scheme.epsilon_d)
    return inv / math.fsum(inv)


def _objective_value(scheme, distances):
    distances = np.asarray(distances, dtype=float)
    if scheme.kind == "equal":
        return math.fsum(distances**2)
    return math.fsum(distances)


def _inner_options(opts, group):
    if opts.tol is not None:
        return opts
    # momentum errors are amplified by G^-1 and by large deformations; the mean
    # momentum only settles below eps when matches are resolved near round-off
    diameter = max(t.diameter() for t in group)
    return replace(opts, tol=1e-12 * (diameter if diameter > 0 else 1.0))


def _match_all(base, group, spec, opts, inits, threads):
    factor = GramFactor(base.points, spec)

    def one(i):
        try:
            res = log_map(base, group[i], spec, opts, initial_velocity=inits[i], gram=factor)
        except ShootingError as exc:
            raise AveragingError(f"matching member {i} failed: {exc}", member=i) from exc
        if not res.converged:
            raise AveragingError(
                f"matching member {i} did not converge "
                f"(miss-fit {res.final_missfit:.3g} > tol {res.tol:.3g})",
                member=i,
            )
        return res

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(len(group))))
    else:
        results = [one(i) for i in range(len(group))]
    dists = np.array(
        [math.sqrt(max(sobolev_norm_sq(base.points, r.momentum.momenta, spec), 0.0))
         for r in results]
    )
    return results, dists


def _check_group(group):
    if len(group) < 1:
        raise ValueError("group must contain at least one template")
    shape = group[0].points.shape
    for i, member in enumerate(group):
        if member.points.shape != shape:
            raise ValueError(
                f"member {i} has {len(member)} landmarks, expected {shape[0]}"
            )


def initial_guess(group) -> LandmarkTemplate:
    """Coordinate-wise mean of the group, nudged off any member it coincides with."""
    _check_group(group)
    stacked = np.stack([t.points for t in group])
    mean = _fsum(stacked) / len(group)
    if any(np.array_equal(mean, t.points) for t in group):
        diameter = max(t.diameter() for t in group)
        scale = 1e-3 * (diameter if diameter > 0 else 1.0)
        k = np.arange(mean.shape[0])
        mean = mean + scale * np.column_stack([np.cos(k + 0.5), np.sin(k + 0.5)])
    return LandmarkTemplate(mean, label="average")


def objective(group, candidate: LandmarkTemplate, scheme: WeightScheme = WeightScheme(),
              spec: KernelSpec = CONIC, opts: ShootingOptions | None = None) -> float:
    """Sum of geodesic-distance estimates (robust) or of their squares (equal)."""
    _check_group(group)
    opts = opts or ShootingOptions()
    _, dists = _match_all(candidate, group, spec, opts, [None] * len(group), None)
    return _objective_value(scheme, dists)


def group_average(
    group,
    scheme: WeightScheme = WeightScheme(),
    spec: KernelSpec = CONIC,
    opts: ShootingOptions | None = None,
    *,
    initial: LandmarkTemplate | None = None,
    eps: float | None = None,
    max_iter: int = 100,
    max_backtracks: int = 12,
    warm_start: bool = True,
    threads: int | None = None,
) -> AverageResult:
    """Weighted average of a group of templates on the momentum field.

    Parameters
    ----------
    group : sequence of LandmarkTemplate
        Members with a shared landmark count and correspondence.
    scheme : WeightScheme
        ``equal`` weights ``1/m`` or ``robust`` inverse-distance weights.
    opts : ShootingOptions, optional
        Inner Log-map settings. When ``opts.tol`` is None the inner tolerance
        is ``1e-12`` times the group diameter.
    initial : LandmarkTemplate, optional
        Starting average; must not be a group member. Defaults to the
        coordinate-wise mean.
    eps : float, optional
        Stopping threshold on the stacked mean momentum, ``1e-6 * sqrt(N)``
        by default.
    max_backtracks : int
        Halvings of the step along the mean momentum allowed when a full step
        would increase the objective.
    warm_start : bool
        Start each inner Log map from the previous tangent vector minus the
        applied mean step.

    Raises
    ------
    AveragingError
        When a member cannot be matched from the current average.
    """
    _check_group(group)
    n_landmarks = group[0].points.shape[0]
    m = len(group)
    eps = 1e-6 * math.sqrt(n_landmarks) if eps is None else float(eps)
    opts = _inner_options(opts or ShootingOptions(), group)

    if initial is None:
        avg = initial_guess(group)
    else:
        if any(np.array_equal(initial.points, t.points) for t in group):
            raise AveragingError("the initial guess must not coincide with a group member")
        avg = initial

    logs, dists = _match_all(avg, group, spec, opts, [None] * m, threads)
    obj = _objective_value(scheme, dists)
    history = [obj]
    mean_norms = []
    p_bar_prev = np.zeros_like(avg.points)
    converged = False
    backtracks = 0
    iterations = 0

    for _ in range(max_iter):
        weights = compute_weights(scheme, dists)
        p_bar = _fsum([w * res.momentum.momenta for w, res in zip(weights, logs)])
        mean_norm = float(np.linalg.norm(p_bar))
        mean_norms.append(mean_norm)
        if np.linalg.norm(p_bar - p_bar_prev) <= eps and mean_norm <= eps:
            converged = True
            break
        p_bar_prev = p_bar
        iterations += 1

        u_bar = momentum_to_velocity(avg.points, p_bar, spec)
        step = 1.0
        accepted = False
        for _ in range(max_backtracks + 1):
            cand = exp_map(avg, step * p_bar, spec, opts.steps)
            inits = [res.velocity - step * u_bar for res in logs] if warm_start else [None] * m
            cand_logs, cand_dists = _match_all(cand, group, spec, opts, inits, threads)
            cand_obj = _objective_value(scheme, cand_dists)
            if cand_obj <= obj * (1 + DESCENT_RTOL):
                accepted = True
                break
            step *= 0.5
            backtracks += 1
        if not accepted:
            converged = mean_norm <= eps
            break
        avg, logs, dists, obj = LandmarkTemplate(cand.points, label="average"), cand_logs, cand_dists, cand_obj
        history.append(obj)

    residuals = [MomentumField(res.momentum.momenta, avg) for res in logs]
    return AverageResult(
        average=avg,
        residual_momenta=residuals,
        objective_history=np.asarray(history),
        iterations=iterations,
        converged=converged,
        weights=compute_weights(scheme, dists),
        distances=dists,
        mean_momentum_norms=np.asarray(mean_norms),
        backtracks=backtracks,
    )
