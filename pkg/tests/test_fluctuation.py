import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import bm, random_measure, random_model
from lkf.errors import InputError, LimitNotConvergedError
from lkf.fluctuation import (
    ExitProblem,
    LimitConfig,
    OneSidedStructure,
    limit_C,
    limit_c,
    one_sided_down,
    one_sided_down_resolvent,
    one_sided_up,
    one_sided_up_diagnostic,
    one_sided_up_resolvent,
    resolvent_density,
    resolvent_density_raw,
    resolvent_integral,
    two_sided_down,
    two_sided_up,
)
from lkf.levy import LevyModel
from lkf.measures import PiecewiseConstant, RadonMeasureSpec, apply_T
from lkf.scale import ScaleFunction
from lkf.volterra import SolveConfig

BM = bm()
ZERO = RadonMeasureSpec.zero()
ATOM1 = RadonMeasureSpec.atomic([(1.0, 1.0)])
CFG = SolveConfig(step=1e-3)
COARSE = SolveConfig(step=1e-2)


def ones(z):
    return np.ones_like(np.asarray(z, dtype=float))


def test_gamblers_ruin():
    p = ExitProblem(BM, 0.0, ZERO, 0.0, 1.0, 2.0)
    assert two_sided_up(p, CFG) == pytest.approx(0.5, abs=1e-14)
    assert two_sided_down(p, CFG) == pytest.approx(0.5, abs=1e-14)


def test_single_ubv_atom():
    p = ExitProblem(BM, 0.0, ATOM1, 0.0, 1.0, 2.0)
    assert two_sided_up(p, COARSE) == pytest.approx(1 / 3, abs=1e-12)
    assert two_sided_down(p, COARSE) == pytest.approx(1 / 3, abs=1e-12)


def test_pure_drift_forced_crossing():
    m = LevyModel.pure_drift(1.0)
    p = ExitProblem(m, 0.0, RadonMeasureSpec.atomic([(1.5, math.log(2.0))]), 0.0, 1.0, 2.0)
    assert two_sided_up(p, COARSE) == pytest.approx(0.5, abs=1e-14)


def test_two_sided_classical_q_positive():
    m = LevyModel.cramer_lundberg(1.5, 1.0, 1.0)
    sf = ScaleFunction(m, 0.3)
    p = ExitProblem(m, 0.3, ZERO, -0.5, 0.7, 2.0)
    w = sf.w(np.array([1.2, 2.5]))
    z = sf.z(np.array([1.2, 2.5]))
    assert two_sided_up(p, COARSE) == pytest.approx(w[0] / w[1], rel=1e-13)
    assert two_sided_down(p, COARSE) == pytest.approx(z[0] - z[1] * w[0] / w[1], rel=1e-12)


def test_exit_at_b():
    m = LevyModel.cramer_lundberg(1.5, 1.0, 1.0)
    p = ExitProblem(m, 0.2, ATOM1, 0.0, 2.0, 2.0)
    assert two_sided_down(p, COARSE) == pytest.approx(0.0, abs=1e-14)
    p = ExitProblem(BM, 0.2, ATOM1, 0.0, 2.0, 2.0)
    assert two_sided_up(p, COARSE) == 1.0
    assert two_sided_down(p, COARSE) == 0.0


def test_resolvent_density_classical():
    p = ExitProblem(BM, 0.0, ZERO, 0.0, 1.0, 2.0)
    assert resolvent_density(p, 1.0, COARSE) == pytest.approx(0.5, abs=1e-14)
    # y > x: (x - c)(b - y)/(b - c) with W(x) = x
    assert resolvent_density(p, 1.5, COARSE) == pytest.approx(1.0 * 0.5 / 2.0, abs=1e-14)
    at_c = ExitProblem(BM, 0.0, ATOM1, 0.0, 0.0, 2.0)
    for y in (0.0, 0.7, 1.0, 1.9):
        assert resolvent_density(at_c, y, COARSE) == 0.0


def test_resolvent_integral_expected_exit_time():
    # (x - c)(b - x)/sigma^2 with sigma^2 = 2
    p = ExitProblem(BM, 0.0, ZERO, 0.0, 1.0, 2.0)
    assert resolvent_integral(p, ones, CFG) == pytest.approx(0.5, abs=1e-6)
    assert resolvent_integral(p, lambda z: 0.0 * ones(z), CFG) == 0.0


def test_resolvent_integral_discounted_occupation():
    # int density dy = (1 - E[e^{-q tau}]) / q
    q = 0.7
    p = ExitProblem(BM, q, ZERO, 0.0, 1.0, 2.0)
    expect = (1 - two_sided_up(p, CFG) - two_sided_down(p, CFG)) / q
    assert resolvent_integral(p, ones, CFG) == pytest.approx(expect, rel=1e-5)


def test_one_sided_up_examples():
    s0 = OneSidedStructure(ZERO, 0.0, 0.0)
    sf = ScaleFunction(BM, 0.5)
    assert one_sided_up(BM, 0.5, s0, 0.3, 1.2, COARSE) == pytest.approx(math.exp(sf.phi * (0.3 - 1.2)), rel=1e-13)
    s = OneSidedStructure(ZERO, 1.0, 0.0)
    assert one_sided_up(BM, 0.0, s, 1.0, 2.0, CFG) == pytest.approx(2 / 3, rel=5e-3)


def test_one_sided_up_diagnostic_decreases():
    s = OneSidedStructure(ZERO, 1.0, 0.0)
    d = one_sided_up_diagnostic(BM, 0.0, s, 1.0, cs=(-2.0, -4.0, -8.0), cfg=SolveConfig(step=4e-3))
    assert d[0] > d[1] > d[2]


def test_one_sided_up_resolvent_examples():
    s = OneSidedStructure(ZERO, 0.0, 0.0)
    q = 0.5
    sf = ScaleFunction(BM, q)
    assert one_sided_up_resolvent(BM, q, s, 0.5, 1.0, 1.5, COARSE) == 0.0
    x, b, y = 0.5, 1.5, 0.2
    expect = math.exp(sf.phi * (x - b)) * sf.w(b - y) - sf.w(x - y)
    assert one_sided_up_resolvent(BM, q, s, x, b, y, COARSE) == pytest.approx(expect, rel=1e-12)
    s1 = OneSidedStructure(RadonMeasureSpec.lebesgue(0.5, 0.0), 1.0, 0.0)
    assert one_sided_up_resolvent(BM, 0.0, s1, 1.0, 1.0, 0.4, COARSE) == 0.0


def test_one_sided_down_examples():
    p = ExitProblem(BM, 0.0, ZERO, 0.0, 1.0)
    assert one_sided_down(p, cfg=COARSE) == pytest.approx(1.0, abs=1e-8)
    q = 0.5
    sf = ScaleFunction(BM, q)
    p = ExitProblem(BM, q, ZERO, 0.0, 1.0)
    expect = sf.z(1.0) - q / sf.phi * sf.w(1.0)
    assert one_sided_down(p, cfg=COARSE) == pytest.approx(expect, abs=1e-8)
    at_c = ExitProblem(BM, 0.3, ATOM1, 0.0, 0.0)
    assert one_sided_down(at_c, cfg=COARSE) == pytest.approx(1.0, abs=1e-14)


def test_one_sided_down_resolvent_examples():
    q = 0.5
    sf = ScaleFunction(BM, q)
    p = ExitProblem(BM, q, ZERO, 0.0, 1.0)
    assert one_sided_down_resolvent(p, 0.0, cfg=COARSE) == pytest.approx(0.0, abs=1e-9)
    y = 0.6
    expect = math.exp(-sf.phi * y) * sf.w(1.0) - sf.w(1.0 - y)
    assert one_sided_down_resolvent(p, y, cfg=COARSE) == pytest.approx(expect, abs=1e-8)


def test_limit_sequences_monotone():
    m = LevyModel.cramer_lundberg(1.5, 1.0, 1.0)
    q = 0.5
    p = ExitProblem(m, q, ZERO, 0.0, 0.5)
    C, hist = limit_C(p, COARSE)
    assert C == pytest.approx(q / ScaleFunction(m, q).phi, rel=1e-6)
    assert np.all(np.diff(hist) <= 1e-10)
    c, hist = limit_c(p, 0.8, COARSE)
    assert c == pytest.approx(math.exp(-ScaleFunction(m, q).phi * 0.8), rel=1e-6)
    assert np.all(np.diff(hist) >= -1e-10) and max(hist) <= 1 + 1e-12


def test_limit_not_converged_reports_iterates():
    p = ExitProblem(BM, 0.5, ZERO, 0.0, 1.0)
    with pytest.raises(LimitNotConvergedError) as err:
        limit_C(p, COARSE, LimitConfig(max_extensions=2, rel_tol=1e-15, abs_tol=0.0))
    assert len(err.value.last_iterates) == 2


def test_problem_validation():
    with pytest.raises(InputError):
        ExitProblem(BM, 0.0, ZERO, 1.0, 0.0, 2.0)
    with pytest.raises(InputError):
        ExitProblem(BM, 0.0, RadonMeasureSpec.zero(window=(0.0, 1.0)), 0.0, 0.5, 2.0)
    with pytest.raises(ValueError):
        ExitProblem(BM, -1.0, ZERO, 0.0, 0.5, 2.0)
    with pytest.raises(InputError):
        two_sided_up(ExitProblem(BM, 0.0, ZERO, 0.0, 0.5), COARSE)
    with pytest.raises(InputError):
        OneSidedStructure(ZERO, -1.0, 0.0)


def test_omega_killing_same_as_premapped():
    # T is the identity on diffuse measures, so results coincide bit for bit
    m = LevyModel.cramer_lundberg(1.5, 1.0, 1.0)
    nu = RadonMeasureSpec(density=PiecewiseConstant([0.5], [1.0]))
    p1 = ExitProblem(m, 0.2, nu, 0.0, 1.0, 2.0)
    p2 = ExitProblem(m, 0.2, apply_T(nu, m), 0.0, 1.0, 2.0)
    for fn in (two_sided_up, two_sided_down):
        assert fn(p1, COARSE) == fn(p2, COARSE)
    assert resolvent_density(p1, 1.3, COARSE) == resolvent_density(p2, 1.3, COARSE)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_up_plus_down_at_most_one(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    nu = random_measure(rng, 0.0, 2.0)
    x = float(rng.uniform(0.0, 2.0))
    p = ExitProblem(model, 0.0, nu, 0.0, x, 2.0)
    up, down = two_sided_up(p, COARSE), two_sided_down(p, COARSE)
    assert -1e-8 <= up <= 1 + 1e-8
    assert -1e-8 <= down
    assert up + down <= 1 + 1e-8


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1.1, 4.0))
def test_more_atom_mass_lowers_up(seed, factor):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    nu = random_measure(rng, 0.0, 2.0, density=False)
    heavier = RadonMeasureSpec(tuple((a, p * factor) for a, p in nu.atoms))
    x = float(rng.uniform(0.0, 2.0))
    q = float(rng.uniform(0.0, 1.0))
    light = two_sided_up(ExitProblem(model, q, nu, 0.0, x, 2.0), COARSE)
    heavy = two_sided_up(ExitProblem(model, q, heavier, 0.0, x, 2.0), COARSE)
    assert heavy <= light + 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_resolvent_density_nearly_nonnegative(seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng)
    nu = random_measure(rng, 0.0, 2.0)
    x = float(rng.uniform(0.0, 2.0))
    p = ExitProblem(model, float(rng.uniform(0.0, 1.0)), nu, 0.0, x, 2.0)
    for y in rng.uniform(0.0, 2.0, size=5):
        assert resolvent_density_raw(p, float(y), COARSE) >= -1e-2


def test_unbounded_killing_density_limit():
    # unit killing everywhere acts like q = 1: Z(x) - W(x) = e^{-x}
    nu = RadonMeasureSpec(density=PiecewiseConstant([-1.0], [1.0]))
    p = ExitProblem(BM, 0.0, nu, 0.0, 1.0)
    assert one_sided_down(p, cfg=COARSE) == pytest.approx(math.exp(-1.0), abs=2e-3)
    with pytest.raises(LimitNotConvergedError):
        one_sided_down(p, LimitConfig(max_nodes=200), COARSE)
