import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from gffx.constants import ALPHA
from gffx.limit_laws import (
    QUADRANTS,
    TestFunction,
    argmax_joint_law,
    below_floor_compensator,
    dyson_shift,
    f_t_indicator_closed_form,
    f_t_transform,
    hill_estimator,
    invariance_test,
    laplace_functional,
    laplace_small_lambda,
    laplace_values,
    max_tail_fit,
    region_weights,
    sample_gumbel_ppp,
    sample_gumbel_ppp_batch,
    sample_max_from_z,
    z_from_spacings,
    z_moment_diagnostics,
)
from gffx.measures import CellMeasure, MaxSample, PointMeasure

# f_t(0) for f = 1{h >= -1}, t = 1, computed with mpmath at 30 digits
F_T_FROZEN = 0.291497708494136611


def _f_t_mpmath(a, beta, t, h):
    mpmath.mp.dps = 30
    alpha = mpmath.sqrt(2 * mpmath.pi)
    dens = lambda x: mpmath.npdf(x, -alpha * t / 2, mpmath.sqrt(t))
    loss = (1 - mpmath.e ** (-beta)) * mpmath.quad(dens, [a - h, mpmath.inf])
    return float(-mpmath.log(1 - loss))


def test_f_t_frozen_value():
    assert _f_t_mpmath(-1.0, 1.0, 1.0, 0.0) == pytest.approx(F_T_FROZEN, abs=1e-15)
    f = TestFunction.indicator(-1.0)
    assert f_t_indicator_closed_form(f, 1.0, 0.0) == pytest.approx(F_T_FROZEN, abs=1e-14)
    tab = f_t_transform(f, 1.0, method="split", grid=np.array([-0.5, 0.0, 0.5]))
    assert tab.table[1] == pytest.approx(F_T_FROZEN, abs=1e-10)


def test_hermite_agrees_with_split_on_a_wide_smooth_profile():
    f = TestFunction.bump(-4.0, 4.0)
    grid = np.linspace(-2, 2, 5)
    a = f_t_transform(f, 0.5, Q=64, method="hermite", grid=grid).table
    b = f_t_transform(f, 0.5, Q=64, method="split", grid=grid).table
    assert np.allclose(a, b, atol=1e-4)


@pytest.mark.parametrize("a,b,beta,t,h", [(-2.0, None, 0.5, 0.3, -1.0), (0.0, 1.0, 2.0, 2.0, 1.5), (1.0, 1.5, 1.0, 0.7, 0.0)])
def test_closed_form_matches_mpmath_window(a, b, beta, t, h):
    f = TestFunction.indicator(a, b, beta)
    mpmath.mp.dps = 30
    alpha = mpmath.sqrt(2 * mpmath.pi)
    dens = lambda x: mpmath.npdf(x, -alpha * t / 2, mpmath.sqrt(t))
    hi = mpmath.inf if b is None else b - h
    loss = (1 - mpmath.e ** (-beta)) * mpmath.quad(dens, [a - h, hi])
    assert f_t_indicator_closed_form(f, t, h) == pytest.approx(float(-mpmath.log(1 - loss)), rel=1e-12)


@settings(max_examples=25)
@given(st.floats(-3, 2), st.floats(0.1, 3), st.floats(0.05, 3))
def test_f_t_preserves_the_gumbel_intensity_integral(a, beta, t):
    """∫(1 - e^{-f_t}) e^{-αh} dh = ∫(1 - e^{-f}) e^{-αh} dh, the exact invariance identity."""
    f = TestFunction.indicator(a, beta=beta)
    lhs = (-math.expm1(-beta)) * math.exp(-ALPHA * a) / ALPHA
    g = lambda h: -math.expm1(-float(f_t_indicator_closed_form(f, t, h))) * math.exp(-ALPHA * h)
    rhs = integrate.quad(g, a + ALPHA * t / 2 - 14 * math.sqrt(t), np.inf, limit=200)[0]
    assert rhs == pytest.approx(lhs, rel=1e-7)


def test_split_quadrature_for_smooth_bump_against_scipy():
    f = TestFunction.bump(-1.0, 1.0, beta=1.5)
    t, h = 0.6, 0.3
    tab = f_t_transform(f, t, method="split", grid=np.array([h, h + 5.0]))
    loss = integrate.quad(
        lambda x: -math.expm1(-float(f.profile(h + x))) * stats.norm.pdf(x, -ALPHA * t / 2, math.sqrt(t)),
        -1.0 - h,
        1.0 - h,
        limit=200,
    )[0]
    assert tab.table[0] == pytest.approx(-math.log1p(-loss), abs=1e-10)
    assert tab.profile(h) == pytest.approx(tab.table[0])


@pytest.mark.parametrize(
    "kw",
    [
        {"kind": "nope"},
        {"kind": "indicator-product", "beta": -1.0},
        {"kind": "smooth-bump", "a": 0.0},
        {"kind": "indicator-product", "a": 1.0, "b": 0.5},
        {"kind": "tabulated", "grid": np.zeros(2)},
    ],
)
def test_test_function_validation(kw):
    with pytest.raises(ValueError):
        TestFunction(**kw)


def test_f_t_requires_positive_time():
    with pytest.raises(ValueError):
        f_t_transform(TestFunction.indicator(0.0), 0.0)


def test_ppp_counts_and_floor():
    Z = CellMeasure.uniform(4, 3.0)
    h_min = -1.0
    draws = sample_gumbel_ppp_batch(Z, h_min, seed=1, size=4000)
    counts = np.array([len(d) for d in draws])
    mean = 3.0 * math.exp(ALPHA) / ALPHA
    assert counts.mean() == pytest.approx(mean, abs=4 * math.sqrt(mean / 4000))
    h = np.concatenate([d.h for d in draws])
    assert h.min() >= h_min
    # heights above the floor are exponential with rate α
    assert stats.kstest(h - h_min, "expon", args=(0, 1 / ALPHA)).pvalue > 1e-3
    a = sample_gumbel_ppp(Z, h_min, 7)
    b = sample_gumbel_ppp(Z, h_min, 7)
    assert np.array_equal(a.h, b.h) and np.array_equal(a.x, b.x)


def test_ppp_positions_follow_cells():
    cells = np.zeros((2, 2))
    cells[1, 0] = 1.0
    d = sample_gumbel_ppp(CellMeasure(cells), -2.0, 3)
    assert len(d) > 0
    assert np.all((d.x[:, 0] >= 0.5) & (d.x[:, 1] < 0.5))


def test_laplace_of_ppp_matches_closed_form():
    Z = CellMeasure.uniform(2, 1.0)
    f = TestFunction.indicator(0.0, beta=0.7)
    ms = [d.to_point_measure() for d in sample_gumbel_ppp_batch(Z, -0.5, 5, 20000)]
    est, se = laplace_functional(ms, f)
    exact = math.exp(-(-math.expm1(-0.7)) / ALPHA)
    assert abs(est - exact) < 4 * se


def test_below_floor_compensator_closed_form():
    f = TestFunction.indicator(-2.0, beta=1.0)
    z, h_min = 2.5, 0.5
    exact = math.exp(-z * (-math.expm1(-1.0)) * (math.exp(2 * ALPHA) - math.exp(-ALPHA * h_min)) / ALPHA)
    assert below_floor_compensator(f, z, h_min) == pytest.approx(exact, rel=1e-10)
    assert below_floor_compensator(TestFunction.indicator(1.0), z, h_min) == 1.0


def test_invariance_holds_for_exact_ppp():
    Z = CellMeasure.uniform(1, 1.0)
    f = TestFunction.indicator(-0.5)
    draws = sample_gumbel_ppp_batch(Z, -1.5, 11, 3000)
    ms = [d.to_point_measure() for d in draws]
    for m in ms:
        m.meta.pop("lam")
    rep = invariance_test(ms, f, 1.0, seed=2, intensities=[Z] * len(ms))
    assert rep.verdict == "pass", rep.details
    assert rep.details["compensated"]


def test_invariance_rejects_f_below_cutoff():
    ms = [PointMeasure.empty(lam=1.0) for _ in range(100)]
    with pytest.raises(ValueError):
        invariance_test(ms, TestFunction.indicator(-2.0), 0.5)


def test_dyson_shift_moments():
    m = PointMeasure(np.full((50000, 2), 0.5), np.zeros(50000), {"lam": 1.0})
    s = dyson_shift(m, 0.8, seed=4)
    assert s.h.mean() == pytest.approx(-ALPHA * 0.4, abs=4 * math.sqrt(0.8 / 50000))
    assert s.h.var() == pytest.approx(0.8, rel=0.03)
    assert "lam" not in s.meta and s.meta["dyson_t"] == 0.8
    assert np.array_equal(dyson_shift(m, 0.0, 1).h, m.h)


def test_laplace_values_by_hand():
    f = TestFunction.indicator(0.0, 1.0, beta=2.0, region=(0.0, 0.5, 0.0, 1.0))
    m = PointMeasure([[0.25, 0.5], [0.75, 0.5], [0.1, 0.1]], [0.5, 0.5, 1.5])
    assert laplace_values([m, PointMeasure.empty()], f).tolist() == [math.exp(-2.0), 1.0]


def test_max_from_z_law():
    z = np.full(100000, 4.0)
    m = sample_max_from_z(z, seed=3)
    for t in (-0.5, 0.0, 1.0):
        p = math.exp(-4.0 * math.exp(-ALPHA * t) / ALPHA)
        assert (m <= t).mean() == pytest.approx(p, abs=4 * math.sqrt(p * (1 - p) / len(z)))


def test_z_from_spacings_recovers_total():
    Z = CellMeasure.uniform(1, 5.0)
    d = sample_gumbel_ppp(Z, -3.0, 8)
    seq, est = z_from_spacings(d.h)
    assert len(seq) == len(d)
    assert est == pytest.approx(5.0, rel=0.1)
    with pytest.raises(ValueError):
        z_from_spacings(d.h[:10])


def test_max_tail_fit_recovers_alpha():
    m = sample_max_from_z(np.full(200000, 1.0), seed=2)
    # deep in the tail 1 - exp(-e^{-αt}/α) is a pure exponential to within 1e-3
    rep = max_tail_fit(m, window=(1.5, 2.8), t_power=0.0, n_boot=50)
    assert rep.estimate == pytest.approx(ALPHA, abs=4 * rep.stderr + 0.02)
    assert rep.details["C_star_hat"] == pytest.approx(1 / ALPHA, rel=0.1)
    with pytest.raises(ValueError):
        max_tail_fit(m[:100])


@given(st.lists(st.tuples(st.integers(0, 8), st.integers(0, 8)), min_size=1, max_size=20))
def test_region_weights_partition_of_unity(pts):
    x = np.array(pts, dtype=float) / 8
    total = sum(region_weights(x, q) for q in QUADRANTS)
    assert np.allclose(total, 1.0)


def test_argmax_joint_law_uniform_positions():
    rng = np.random.default_rng(0)
    n = 20000
    ms = MaxSample(sample_max_from_z(np.ones(n), seed=6), rng.random((n, 2)), 64)
    rep = argmax_joint_law(ms, z_model=[CellMeasure.uniform(2, 1.0)])
    assert rep.verdict == "pass"
    assert np.allclose(np.sum(rep.details["probabilities"]), 1.0)
    assert rep.details["model_sup_discrepancy"] < 0.05


def test_pareto_tail_diagnostics():
    z = 1.0 / np.random.default_rng(1).random(200000)  # P(Z > z) = 1/z
    assert hill_estimator(z) == pytest.approx(1.0, abs=0.05)
    assert z_moment_diagnostics(z).verdict == "pass"
    rep = laplace_small_lambda(z, n_boot=200)
    d = rep.details
    assert abs(d["plateau_A"] - 1.0) < 3 * d["stderr_A"]
    assert abs(d["plateau_B"] - 1.0) < 3 * d["stderr_B"]
    assert rep.verdict == "pass"
    with pytest.raises(ValueError):
        laplace_small_lambda(-z)
