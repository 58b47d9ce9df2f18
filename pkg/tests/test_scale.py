import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lkf.errors import DomainError
from lkf.levy import FiniteActivityJumps, LevyModel, phi, psi, psi_prime
from lkf.scale import ScaleFunction, shift_residual, verify_laplace, w_q, z_q
from lkf.volterra import make_grid

BM = LevyModel.brownian(math.sqrt(2.0))
CL = LevyModel.cramer_lundberg(1.5, 1.0, 1.0)
MIXED = LevyModel(0.8, 0.3, FiniteActivityJumps(1.2, 0.7))
DRIFT = LevyModel.pure_drift(1.0)


def inverse_laplace_w(model, q, x):
    """W by numerical inversion of 1/(psi - q); independent of the closed forms."""
    mp.mp.dps = 30
    a = model.jumps.rate if model.jumps else 0.0
    mu = model.jumps.mu if model.jumps else 1.0
    g, s = model.gamma, model.sigma

    def F(t):
        return 1 / (g * t + s**2 * t**2 / 2 - a * t / (mu + t) - q)

    return float(mp.invertlaplace(F, x, method="talbot"))


def models():
    return st.one_of(
        st.builds(lambda s, g: LevyModel(s, g), st.floats(0.3, 2.0), st.floats(-1.0, 1.0)),
        st.builds(LevyModel.cramer_lundberg, st.floats(0.5, 3.0), st.floats(0.1, 2.0), st.floats(0.2, 2.0)),
        st.builds(lambda s, g, a, m: LevyModel(s, g, FiniteActivityJumps(a, m)),
                  st.floats(0.3, 2.0), st.floats(-1.0, 1.0), st.floats(0.1, 2.0), st.floats(0.2, 2.0)),
        st.builds(LevyModel.pure_drift, st.floats(0.2, 3.0)),
    )


def test_brownian_w_is_identity_at_q0():
    sf = ScaleFunction(BM, 0.0)
    assert w_q(sf, 1.0) == pytest.approx(1.0, abs=1e-15)
    xs = np.linspace(0, 5, 11)
    np.testing.assert_allclose(sf.w(xs), xs, atol=1e-14)


def test_brownian_w_sinh_at_q1():
    sf = ScaleFunction(BM, 1.0)
    xs = np.array([0.1, 1.0, 3.0])
    np.testing.assert_allclose(sf.w(xs), np.sinh(xs), rtol=1e-14)


def test_brownian_with_drift_closed_form():
    s, g, q = 1.3, -0.4, 0.7
    sf = ScaleFunction(LevyModel.brownian(s, g), q)
    delta = math.sqrt(g * g + 2 * q * s * s) / s**2
    for x in (0.2, 1.0, 2.5):
        expected = 2 / (s * s * delta) * math.exp(-g * x / s**2) * math.sinh(delta * x)
        assert sf.w(x) == pytest.approx(expected, rel=1e-13)


def test_negative_argument_is_zero():
    for m in (BM, CL, MIXED, DRIFT):
        sf = ScaleFunction(m, 0.3)
        assert sf.w(-0.5) == 0.0
        assert sf.z(-1.0) == 1.0


def test_pure_drift():
    assert ScaleFunction(DRIFT, 0.0).w(2.0) == 1.0
    sf = ScaleFunction(LevyModel.pure_drift(2.0), 0.6)
    assert sf.w(1.5) == pytest.approx(0.5 * math.exp(0.3 * 1.5), rel=1e-14)


def test_cramer_lundberg_q0_classical():
    # W(x) = (1 - a/(d mu) e^{(a/d - mu) x}) / (d - a/mu)
    d, a, mu = 1.5, 1.0, 1.0
    sf = ScaleFunction(CL, 0.0)
    for x in (0.0, 0.5, 2.0, 7.0):
        expected = (1 - a / (d * mu) * math.exp((a / d - mu) * x)) / (d - a / mu)
        assert sf.w(x) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("model,q", [(CL, 0.4), (MIXED, 0.5), (MIXED, 0.0), (LevyModel(1.0, -0.8, FiniteActivityJumps(0.5, 2.0)), 0.2)])
def test_w_against_numerical_inversion(model, q):
    sf = ScaleFunction(model, q)
    for x in (0.3, 1.0, 3.0):
        assert sf.w(x) == pytest.approx(inverse_laplace_w(model, q, x), rel=1e-12)


def test_w_at_zero():
    assert ScaleFunction(BM, 0.5).w_at_zero == 0.0
    assert ScaleFunction(MIXED, 0.5).w_at_zero == 0.0
    assert ScaleFunction(CL, 0.5).w_at_zero == 1 / 1.5
    assert ScaleFunction(CL, 0.5).w(0.0) == 1 / 1.5


def test_z_q0_is_one():
    sf = ScaleFunction(MIXED, 0.0)
    np.testing.assert_array_equal(z_q(sf, np.array([-1.0, 0.0, 2.0])), 1.0)


def test_z_brownian_cosh():
    sf = ScaleFunction(BM, 1.0)
    assert sf.z(1.0) == pytest.approx(math.cosh(1.0), rel=1e-14)


@pytest.mark.parametrize("model", [CL, MIXED, LevyModel.brownian(0.9, 0.4), LevyModel.pure_drift(0.7)])
def test_z_against_quadrature(model):
    sf = ScaleFunction(model, 0.8)
    for x in (0.5, 2.0):
        val, _ = integrate.quad(sf.w, 0.0, x, epsabs=1e-14, epsrel=1e-13)
        assert sf.z(x) == pytest.approx(1 + 0.8 * val, rel=1e-11)


def test_array_and_scalar_agree():
    sf = ScaleFunction(MIXED, 0.3)
    xs = np.array([-1.0, 0.0, 0.25, 4.0])
    np.testing.assert_allclose(sf.w(xs), [sf.w(float(x)) for x in xs], rtol=0, atol=0)


def test_verify_laplace_examples():
    assert verify_laplace(ScaleFunction(BM, 0.0), 2.0, 30.0) < 1e-8
    assert verify_laplace(ScaleFunction(CL, 0.0), 3.0, 40.0) < 1e-6
    sf = ScaleFunction(BM, 1.0)
    with pytest.raises(DomainError):
        verify_laplace(sf, sf.phi, 50.0)
    with pytest.raises(DomainError):
        verify_laplace(sf, 2.0, 1.0)


def test_shift_residual_examples():
    grid = make_grid(0.0, 1.0, 1e-3)
    assert shift_residual(ScaleFunction(BM, 0.0), 0.0, 1.0, 0.0, grid) == 0.0
    assert shift_residual(ScaleFunction(BM, 0.0), 1.0, 1.0, 0.0, grid) <= 1e-5
    assert shift_residual(ScaleFunction(DRIFT, 0.0), 1.0, 1.0, 0.0, grid) <= 1e-5


@settings(max_examples=20, deadline=None)
@given(models(), st.one_of(st.just(0.0), st.floats(0.01, 2.0)))
def test_w_strictly_increasing(model, q):
    sf = ScaleFunction(model, q)
    xs = np.linspace(0.0, 5.0, 1000)
    steps = np.diff(sf.w(xs))
    if model.family == "pure_drift" and q == 0:
        # W is the constant 1/d here
        assert np.all(steps == 0)
    else:
        assert np.all(steps > 0)


@settings(max_examples=20, deadline=None)
@given(models(), st.floats(0.05, 2.0))
def test_damped_w_bounded_by_inverse_slope(model, q):
    sf = ScaleFunction(model, q)
    xs = np.linspace(0.0, 8.0, 400)
    damped = np.exp(-sf.phi * xs) * sf.w(xs)
    assert np.all(np.diff(damped) >= -1e-12 * damped[1:])
    assert damped.max() <= 1 / psi_prime(model, sf.phi) + 1e-9


@settings(max_examples=20, deadline=None)
@given(models(), st.floats(0.0, 2.0), st.floats(0.3, 3.0))
def test_laplace_residual_small(model, q, gap):
    sf = ScaleFunction(model, q)
    theta = sf.phi + gap
    upper = math.ceil(25.0 / gap) + 1.0
    assert verify_laplace(sf, theta, upper) < 1e-6 * max(1.0, 1 / (psi(model, theta) - q))


def test_phi_property_matches_phi():
    for m in (BM, CL, MIXED):
        assert ScaleFunction(m, 0.7).phi == pytest.approx(phi(m, 0.7), abs=1e-11)
