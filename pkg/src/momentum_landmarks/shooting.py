"""Log map by prediction-correction shooting.

Starting from a nodal velocity guess ``u`` on the reference, each iteration
shoots the reference forward with momentum ``G^-1 u`` and corrects

    u <- u + h * (target - endpoint)

landmark by landmark.  ``h`` stays fixed while the miss-fit decreases; a step
that increases it is reverted and ``h`` is shrunk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ShootingError
from .geodesic import (
    DEFAULT_STEPS,
    GramFactor,
    LandmarkTemplate,
    MomentumField,
    _endpoint,
    distance_estimate,
    rms_distance,
)
from .kernel import CONIC, KernelSpec

__all__ = ["ShootingOptions", "ShootingResult", "log_map", "default_tolerance"]


@dataclass(frozen=True)
class ShootingOptions:
    """Controls for :func:`log_map`.

    ``tol=None`` means ``1e-6`` times the reference template's diameter.
    """

    h0: float = 0.5
    shrink: float = 0.5
    tol: float | None = None
    max_iter: int = 500
    steps: int = DEFAULT_STEPS
    h_min: float = 1e-4

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.tol is not None and not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")

    def to_dict(self) -> dict:
        return {
            "h0": self.h0,
            "shrink": self.shrink,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "steps": self.steps,
            "h_min": self.h_min,
        }


@dataclass(frozen=True)
class ShootingResult:
    momentum: MomentumField
    velocity: np.ndarray
    iterations: int
    final_missfit: float
    converged: bool
    missfit_history: np.ndarray
    tol: float
    spec: KernelSpec = field(default=CONIC, repr=False)

    @property
    def distance(self) -> float:
        """Tangent-norm estimate of the geodesic distance reference -> target."""
        return distance_estimate(self.momentum.base.points, self.momentum.momenta, self.spec)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_missfit": self.final_missfit,
            "converged": self.converged,
            "tol": self.tol,
            "missfit_history": [float(v) for v in self.missfit_history],
        }


def default_tolerance(reference: LandmarkTemplate) -> float:
    diameter = reference.diameter()
    return 1e-6 * (diameter if diameter > 0 else 1.0)


def log_map(
    reference: LandmarkTemplate,
    target: LandmarkTemplate,
    spec: KernelSpec = CONIC,
    opts: ShootingOptions | None = None,
    *,
    initial_velocity=None,
    gram: GramFactor | None = None,
) -> ShootingResult:
    """Find the initial momentum on ``reference`` whose Exp map reaches ``target``.

    Parameters
    ----------
    initial_velocity : array_like, optional
        Starting nodal velocity. Defaults to zero.
    gram : GramFactor, optional
        Pre-computed factorization of the reference Gram matrix.

    Returns
    -------
    ShootingResult
        ``converged`` is False when ``max_iter`` is exhausted or the step
        parameter falls below ``h_min``; no exception is raised in that case.

    Raises
    ------
    ShootingError
        If the templates are incompatible or the integrator diverges.
    """
    opts = opts or ShootingOptions()
    if reference.points.shape != target.points.shape:
        raise ShootingError(
            f"reference has {len(reference)} landmarks, target has {len(target)}"
        )
    tol = opts.tol if opts.tol is not None else default_tolerance(reference)
    q0 = reference.points
    goal = target.points
    factor = gram if gram is not None else GramFactor(q0, spec)

    if initial_velocity is None:
        u = np.zeros_like(q0)
        p = np.zeros_like(q0)
    else:
        u = np.array(initial_velocity, dtype=float)
        p = factor.solve(u)

    try:
        end = _endpoint(q0, p, spec, opts.steps) if initial_velocity is not None else q0.copy()
    except DivergenceError as exc:
        raise ShootingError(f"integrator diverged on the initial guess: {exc}") from exc
    miss = rms_distance(goal, end)
    if initial_velocity is not None and not miss < rms_distance(goal, q0):
        # a poor warm start is worse than the zero field
        u = np.zeros_like(q0)
        p = np.zeros_like(q0)
        end = q0.copy()
        miss = rms_distance(goal, end)

    h = opts.h0
    history = []
    while miss > tol and len(history) < opts.max_iter:
        u_trial = u + h * (goal - end)
        p_trial = factor.solve(u_trial)
        try:
            end_trial = _endpoint(q0, p_trial, spec, opts.steps)
        except DivergenceError as exc:
            raise ShootingError(f"integrator diverged during shooting: {exc}") from exc
        miss_trial = rms_distance(goal, end_trial)
        if miss_trial < miss:
            u, p, end, miss = u_trial, p_trial, end_trial, miss_trial
        else:
            h *= opts.shrink
        history.append(miss)
        if h < opts.h_min:
            break

    return ShootingResult(
        momentum=MomentumField(p, reference),
        velocity=u,
        iterations=len(history),
        final_missfit=miss,
        converged=bool(miss <= tol),
        missfit_history=np.asarray(history),
        tol=tol,
        spec=spec,
    )
