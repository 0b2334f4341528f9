import numpy as np
import pytest

from momentum_landmarks.errors import ShootingError
from momentum_landmarks.geodesic import LandmarkTemplate, exp_map, momentum_to_velocity, rms_distance
from momentum_landmarks.shooting import ShootingOptions, default_tolerance, log_map

from conftest import spread_points

SQUARE = LandmarkTemplate([[0, 0], [1, 0], [1, 1], [0, 1]])
SHIFTED = LandmarkTemplate(SQUARE.points + [0.05, 0.0])


def test_identity_gives_exact_zero():
    res = log_map(SQUARE, SQUARE)
    assert res.converged and res.iterations == 0 and res.final_missfit == 0
    assert np.array_equal(res.momentum.momenta, np.zeros((4, 2)))
    assert len(res.missfit_history) == res.iterations


def test_square_translation_round_trip():
    res = log_map(SQUARE, SHIFTED, opts=ShootingOptions(tol=1e-6))
    assert res.converged and res.final_missfit <= 1e-6
    assert rms_distance(exp_map(SQUARE, res.momentum).points, SHIFTED.points) <= 1e-6
    assert res.distance > 0


def test_distance_symmetry_for_small_deformation():
    opts = ShootingOptions(tol=1e-9)
    d01 = log_map(SQUARE, SHIFTED, opts=opts).distance
    d10 = log_map(SHIFTED, SQUARE, opts=opts).distance
    assert d01 == pytest.approx(d10, rel=1e-3)


def test_missfit_history_monotone_and_bounded(rng):
    q = spread_points(rng, 8)
    p = rng.normal(0, 0.5, (8, 2))
    ref = LandmarkTemplate(q)
    res = log_map(ref, exp_map(ref, p))
    assert res.converged and res.missfit_history[-1] <= res.tol
    assert np.all(np.diff(res.missfit_history) <= 0)


def test_iteration_cap_returns_unconverged():
    res = log_map(SQUARE, LandmarkTemplate(SQUARE.points * 1.5), opts=ShootingOptions(max_iter=2))
    assert not res.converged and res.iterations == 2 and res.final_missfit > res.tol


def test_default_tolerance_scales_with_diameter():
    assert default_tolerance(SQUARE) == pytest.approx(np.sqrt(2) * 1e-6)
    assert default_tolerance(LandmarkTemplate([[1, 1]])) == 1e-6


def test_mismatched_templates():
    with pytest.raises(ShootingError):
        log_map(SQUARE, LandmarkTemplate([[0, 0]]))


@pytest.mark.parametrize("kw", [dict(h0=0), dict(shrink=1), dict(tol=-1), dict(max_iter=0), dict(steps=0)])
def test_invalid_options(kw):
    with pytest.raises(ValueError):
        ShootingOptions(**kw)


def test_warm_start_is_used_and_bad_start_is_discarded(rng):
    q = spread_points(rng, 6)
    p = rng.normal(0, 0.4, (6, 2))
    ref = LandmarkTemplate(q)
    target = exp_map(ref, p)
    cold = log_map(ref, target)
    warm = log_map(ref, target, initial_velocity=momentum_to_velocity(q, p) * 0.99)
    assert warm.converged and warm.iterations < cold.iterations
    bad = log_map(ref, target, initial_velocity=-10 * momentum_to_velocity(q, p))
    assert bad.converged
