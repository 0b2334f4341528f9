import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from momentum_landmarks.errors import DegenerateRadiusError, KernelError
from momentum_landmarks.kernel import CONIC, KernelSpec, gram_matrix, green_derivative, green_value

from conftest import spread_points


def bessel_k_quad(nu, x):
    # K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt
    val, _ = integrate.quad(lambda t: math.exp(-x * math.cosh(t)) * math.cosh(nu * t), 0, 50,
                            epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


# frozen from bessel_k_quad(1, 1) / (4 pi); tabulated K_1(1) = 0.6019072302
K1_AT_1 = 0.6019072301972346
G_B2_AT_1 = K1_AT_1 / (4 * math.pi)


def test_conic_value_at_zero():
    assert green_value(0.0) == pytest.approx(1 / (2 * math.pi), rel=1e-15)


def test_conic_value_at_one():
    assert green_value(1.0) == pytest.approx(math.exp(-1) / (2 * math.pi), rel=1e-15)


def test_b2_value_matches_quadrature_oracle():
    assert bessel_k_quad(1, 1.0) == pytest.approx(K1_AT_1, rel=1e-10)
    assert green_value(1.0, KernelSpec(b=2.0)) == pytest.approx(G_B2_AT_1, rel=1e-10)
    assert G_B2_AT_1 == pytest.approx(0.0478983, abs=1e-7)


@pytest.mark.parametrize("b", [1.25, 2.0, 2.5, 3.0])
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_general_value_matches_quadrature(a, b):
    spec = KernelSpec(a=a, b=b)
    nu = b - 1
    for r in (0.1, 0.7, 2.5):
        expected = 2 ** (1 - b) / (2 * math.pi * a * a**b * math.gamma(b)) * r**nu * bessel_k_quad(nu, r / a)
        assert green_value(r, spec) == pytest.approx(expected, rel=1e-9)


def test_general_limit_at_zero_is_continuous():
    spec = KernelSpec(a=0.8, b=2.5)
    assert green_value(0.0, spec) == pytest.approx(green_value(1e-7, spec), rel=1e-6)


def test_b_one_has_no_finite_value_at_zero():
    with pytest.raises(KernelError):
        green_value(0.0, KernelSpec(b=1.0))


def test_nearly_conic_bessel_path_agrees_with_closed_form():
    r = np.linspace(0, 5, 11)
    for a in (1.0, 0.7):
        near = green_value(r, KernelSpec(a=a, b=1.5 + 1e-9))
        assert np.allclose(near, green_value(r, KernelSpec(a=a)), rtol=1e-7)


def test_conic_derivative_examples():
    assert green_derivative(1.0) == pytest.approx(-math.exp(-1) / (2 * math.pi), rel=1e-14)
    assert green_derivative(0.5) == pytest.approx(-math.exp(-0.5) / (2 * math.pi), rel=1e-14)
    assert green_derivative(0.5) == pytest.approx(-0.0965324, abs=1e-7)


def test_derivative_finite_difference_b2():
    h, spec = 1e-5, KernelSpec(b=2.0)
    fd = (green_value(1 + h, spec) - green_value(1 - h, spec)) / (2 * h)
    assert abs(green_derivative(1.0, spec) - fd) < 1e-6


@given(r=st.floats(0.01, 10.0), b=st.sampled_from([1.5, 2.0, 2.5]), a=st.sampled_from([0.5, 1.0]))
def test_derivative_consistency(r, b, a):
    spec = KernelSpec(a=a, b=b)
    r = r * a
    h = 1e-6 * a
    fd = (green_value(r + h, spec) - green_value(r - h, spec)) / (2 * h)
    assert green_derivative(r, spec) == pytest.approx(fd, rel=1e-6, abs=1e-12)


def test_derivative_below_cutoff_signals():
    with pytest.raises(DegenerateRadiusError):
        green_derivative(0.0)
    with pytest.raises(DegenerateRadiusError):
        green_derivative(CONIC.cutoff / 2)


@pytest.mark.parametrize("kw", [dict(a=0), dict(a=-1), dict(b=0.9), dict(n=3), dict(r_cutoff=1e-2)])
def test_invalid_specs(kw):
    with pytest.raises(KernelError):
        KernelSpec(**kw)


def test_gram_examples():
    assert np.array_equal(gram_matrix([[0.3, 0.1]]), [[1 / (2 * math.pi)]])
    g = gram_matrix([[1.0, 1.0], [1.0, 1.0]])
    assert np.allclose(g, 1 / (2 * math.pi)) and np.linalg.matrix_rank(g) == 1
    g = gram_matrix([[0.0, 0.0], [2.0, 0.0]])
    assert g[0, 1] == pytest.approx(0.0215393, abs=1e-7)
    assert g[0, 0] == pytest.approx(0.1591549, abs=1e-7)


def test_gram_symmetric_and_positive_definite(rng):
    for trial in range(1000):
        n = rng.integers(1, 21)
        pts = rng.uniform(-3, 3, (n, 2))
        spec = CONIC if trial % 2 else KernelSpec(b=2.0)
        g = gram_matrix(pts, spec)
        assert np.array_equal(g, g.T)
        np.linalg.cholesky(g)


def test_shrinking_a_sharpens_diagonal(rng):
    for _ in range(20):
        pts = spread_points(rng, 6)
        ratios = []
        for a in (2.0, 1.0, 0.5, 0.25):
            g = gram_matrix(pts, KernelSpec(a=a))
            ratios.append(g[0, 0] / np.max(g - np.diag(np.diag(g))))
        assert np.all(np.diff(ratios) > 0)
