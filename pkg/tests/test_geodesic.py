import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from momentum_landmarks.errors import ConversionError, DivergenceError
from momentum_landmarks.geodesic import (
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
from momentum_landmarks.kernel import CONIC, KernelSpec, green_value

from conftest import spread_points

TWO_Q = np.array([[-1.0, 0.0], [1.0, 0.0]])
TWO_P = np.array([[1.0, 0.0], [-1.0, 0.0]])


def test_template_validation():
    with pytest.raises(ValueError):
        LandmarkTemplate(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        LandmarkTemplate([[0.0, np.nan]])
    t = LandmarkTemplate([[0, 0], [3, 4]])
    assert t.diameter() == 5 and len(t) == 2
    with pytest.raises(ValueError):
        t.points[0, 0] = 1.0


def test_momentum_field_shape_check():
    base = LandmarkTemplate([[0, 0], [1, 0]])
    with pytest.raises(ValueError):
        MomentumField(np.zeros((3, 2)), base)


def test_single_particle_moves_at_speed_g0():
    traj = evolve([[0.0, 0.0]], [[1.0, 0.0]])
    assert np.allclose(traj.q[-1], [[1 / (2 * math.pi), 0]], atol=1e-15)
    assert np.allclose(traj.p[-1], [[1, 0]])
    assert np.allclose(traj.hamiltonian_samples, 1 / (4 * math.pi), rtol=1e-14)
    assert traj.times[0] == 0 and traj.times[-1] == 1


def test_two_particle_hamiltonian():
    h0 = hamiltonian(TWO_Q, TWO_P)
    # hand evaluation: (G(0) - G(2)) with G the conic kernel
    assert h0 == pytest.approx((1 - math.exp(-2)) / (2 * math.pi), rel=1e-14)
    assert h0 == pytest.approx(0.1376157, abs=1e-7)
    fine = evolve(TWO_Q, TWO_P, steps=100)
    coarse = evolve(TWO_Q, TWO_P, steps=50)
    assert fine.max_relative_drift() < 1e-6
    assert coarse.max_relative_drift() < 1e-6
    assert rms_distance(fine.endpoint, coarse.endpoint) < 1e-8


def test_zero_momentum_is_stationary():
    base = LandmarkTemplate([[0, 0], [1, 2], [3, 1]])
    assert np.array_equal(exp_map(base, np.zeros((3, 2))).points, base.points)


def test_exp_map_step_halving(rng):
    for _ in range(10):
        q = spread_points(rng, 10)
        p = rng.normal(0, 0.5, (10, 2))
        base = LandmarkTemplate(q)
        assert rms_distance(exp_map(base, p, steps=20).points, exp_map(base, p, steps=40).points) < 1e-8


def test_velocity_field_examples():
    assert np.allclose(velocity_field([[0, 0]], [[1, 0]], [[0, 0]]), [[1 / (2 * math.pi), 0]])
    assert np.allclose(velocity_field(TWO_Q, TWO_P, [[0.0, 0.0]]), 0, atol=1e-17)
    ray = np.column_stack([np.linspace(1, 30, 50), np.zeros(50)])
    mags = np.linalg.norm(velocity_field([[0, 0]], [[1, 0.5]], ray), axis=1)
    assert np.all(np.diff(mags) < 0) and mags[-1] < 1e-10


def test_conversion_examples(rng):
    assert np.allclose(velocity_to_momentum([[0, 0]], [[1, 0]]), [[2 * math.pi, 0]])
    q = spread_points(rng, 20, min_sep=0.3, box=3)
    p = rng.normal(size=(20, 2))
    u = momentum_to_velocity(q, p)
    assert np.linalg.norm(velocity_to_momentum(q, u) - p) / np.linalg.norm(p) < 1e-8


def test_duplicate_points_raise_conversion_error():
    with pytest.raises(ConversionError) as info:
        GramFactor([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
    assert info.value.condition > 1e12 or math.isinf(info.value.condition)


def test_near_duplicates_still_solve():
    q = [[0.0, 0.0], [1e-4, 0.0], [1.0, 0.0]]
    f = GramFactor(q)
    u = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert np.allclose(f.gram @ f.solve(u), u, atol=1e-6)


def test_norm_examples(rng):
    assert hamiltonian(TWO_Q, np.zeros((2, 2))) == 0
    assert sobolev_norm_sq([[0, 0]], [[1, 0]]) == pytest.approx(1 / (2 * math.pi))
    assert distance_estimate([[0, 0]], [[1, 0]]) == pytest.approx(0.3989423, abs=1e-7)
    for _ in range(100):
        n = rng.integers(1, 15)
        q, p = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
        assert sobolev_norm_sq(q, p) == pytest.approx(2 * hamiltonian(q, p), rel=1e-13)


def test_divergence_reports_time():
    with pytest.raises(DivergenceError) as info:
        evolve([[0.0, 0.0], [1e-3, 0.0]], [[1e200, 0.0], [-1e200, 0.0]], steps=10)
    assert 0 < info.value.time <= 1


coords = arrays(float, (6, 2), elements=st.floats(-2, 2))
moms = arrays(float, (6, 2), elements=st.floats(-1, 1))


def _distinct(q, sep=0.1):
    d = np.linalg.norm(q[:, None] - q[None], axis=-1) + np.eye(len(q))
    return d.min() > sep


@given(q=coords, p=moms)
def test_hamiltonian_and_linear_momentum_conserved(q, p):
    if not _distinct(q):
        return
    traj = evolve(q, p, steps=100)
    assert traj.max_relative_drift() < 1e-6
    assert np.allclose(traj.p.sum(axis=1), p.sum(axis=0), atol=1e-10)


@given(q=coords, p=moms)
def test_time_reversal(q, p):
    if not _distinct(q):
        return
    fwd = evolve(q, p, steps=40)
    back = evolve(fwd.q[-1], -fwd.p[-1], steps=40)
    assert rms_distance(back.q[-1], q) < 1e-6
    assert rms_distance(-back.p[-1], p) < 1e-6


def test_step_refinement_is_fourth_order(rng):
    q = spread_points(rng, 8)
    p = rng.normal(0, 0.8, (8, 2))
    ref = evolve(q, p, steps=400).endpoint
    err = [rms_distance(evolve(q, p, steps=s).endpoint, ref) for s in (5, 10, 20)]
    orders = np.log2(np.array(err[:-1]) / np.array(err[1:]))
    assert np.all(orders > 3.5)


def test_general_kernel_matches_conic_fast_path(rng):
    q = spread_points(rng, 7)
    p = rng.normal(0, 0.5, (7, 2))
    near = KernelSpec(b=1.5 + 1e-10)
    assert rms_distance(evolve(q, p).endpoint, evolve(q, p, near).endpoint) < 1e-8


def test_general_kernel_conserves_energy(rng):
    q = spread_points(rng, 6)
    p = rng.normal(0, 0.5, (6, 2))
    traj = evolve(q, p, KernelSpec(a=0.7, b=2.5), steps=100)
    assert traj.max_relative_drift() < 1e-6
