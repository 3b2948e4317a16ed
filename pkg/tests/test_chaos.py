import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from gffx.constants import ALPHA, G
from gffx.dmart.chaos import (
    AuxProcessConfig,
    ContinuumFieldSample,
    SquarePartition,
    assemble_covariance,
    default_b_k,
    delta_schedule,
    dmart_vs_lattice_report,
    implied_max_cdf,
    sample_aux_marginals,
    sample_aux_process,
    sample_phi,
    sample_phi_batch,
    sample_y,
    weight_f,
    y_survival,
    zk_measure,
    zk_totals,
)
from gffx.dmart.conformal import psi_density
from gffx.dmart.harmonic import covariance_matrix
from gffx.limit_laws import sample_max_from_z

# total mass of Z_4 for a vanishing coarse field, n = 2, δ = 0.1
Z4_ZERO_FIELD = 0.143086765203751


def test_zero_field_total_frozen_and_by_hand():
    part = SquarePartition(4, 2, 0.1)
    Z = zk_measure(ContinuumFieldSample(part, np.zeros(part.size), 0))
    assert Z.total == pytest.approx(Z4_ZERO_FIELD, rel=1e-13)
    s = 2 * math.sqrt(G) * math.log(4)
    c = np.array([0.1 + 0.8 * 0.25, 0.1 + 0.8 * 0.75])
    nodes = np.array([(a, b) for a in c for b in c])
    by_hand = 16 * (0.8**2 / 4) * psi_density(nodes).sum() * s * math.exp(-ALPHA * s)
    assert Z.total == pytest.approx(by_hand, rel=1e-13)
    assert Z.m == 4 and np.allclose(Z.cells, Z.total / 16)


def test_partition_geometry():
    part = SquarePartition(3, 2, 0.1)
    nodes = part.nodes()
    assert nodes.shape == (36, 2) and part.size == 36
    assert np.all((nodes > 0) & (nodes < 1))
    assert part.node_weight * 4 == pytest.approx(0.8**2)
    for kw in ({"K": 0}, {"K": 2, "n": 0}, {"K": 2, "delta": 0.5}):
        with pytest.raises(ValueError):
            SquarePartition(**kw)


def test_phi_covariance_matches_ck():
    K, n = 2, 1
    vals = sample_phi_batch(K, n, 0.1, seed=1, size=40000)
    C = covariance_matrix(K, SquarePartition(K, n, 0.1).nodes())
    emp = vals.T @ vals / len(vals)
    se = np.sqrt((C**2 + np.outer(np.diag(C), np.diag(C))) / len(vals))
    assert np.all(np.abs(emp - C) < 4.5 * se)
    cov = assemble_covariance(SquarePartition(K, n, 0.1))
    assert np.allclose(cov.matrix, cov.matrix.T)


def test_phi_sampling_is_seeded():
    a, b = sample_phi(4, seed=9), sample_phi(4, seed=9)
    assert np.array_equal(a.values, b.values)
    assert a.by_subsquare().shape == (16, 4)
    assert np.allclose(sample_phi(1, seed=2).values, 0.0)


def test_weight_function():
    assert weight_f(-1.0) == 0.0 and weight_f(0.0) == 0.0
    assert weight_f(2.0) == pytest.approx(2 * math.exp(-2 * ALPHA))
    # maximised at s = 1/α
    assert weight_f(1 / ALPHA) > max(weight_f(0.9 / ALPHA), weight_f(1.1 / ALPHA))


def test_totals_agree_with_measures():
    K, n, d = 4, 2, 0.1
    tot = zk_totals(K, n, d, seed=5, size=3)
    vals = sample_phi_batch(K, n, d, 5, 3)
    part = SquarePartition(K, n, d)
    for v, t in zip(vals, tot):
        assert zk_measure(ContinuumFieldSample(part, v, 5)).total == pytest.approx(t, rel=1e-12)
    Z = zk_measure(ContinuumFieldSample(part, vals[0], 5), m=8)
    assert Z.total == pytest.approx(tot[0], rel=1e-12)
    with pytest.raises(ValueError):
        zk_measure(ContinuumFieldSample(part, vals[0], 5), m=2)


@pytest.mark.parametrize("K,b", [(1, 0.5), (16, 0.5), (10**6, 0.3 * math.log(math.log(10**6 + 16)))])
def test_default_b_k(K, b):
    assert default_b_k(K) == pytest.approx(b)


def test_p_flag_and_validation():
    c = AuxProcessConfig(16)
    assert c.p_flag == pytest.approx(0.5 * math.exp(-ALPHA * 0.5))
    assert c.p_flag == pytest.approx(0.14278, abs=5e-6)
    with pytest.raises(ValueError):
        AuxProcessConfig(16, b_K=0.3)
    with pytest.raises(ValueError):
        AuxProcessConfig(16, C_star=100.0)
    assert delta_schedule(1) == pytest.approx(1 / math.log(3))


@given(st.floats(0.45, 3.0), st.floats(1e-12, 1.0))
def test_y_inverse_survival(b, u):
    y = sample_y(np.array([u]), b)[0]
    assert y >= 0
    assert y_survival(y, b) == pytest.approx(u, abs=1e-8)


def test_y_survival_is_a_tail():
    b = 0.7
    assert integrate.quad(lambda x: float(y_survival(x, b)), 0, 40)[0] == pytest.approx((1 + 1 / (ALPHA * b)) / ALPHA, rel=1e-8)
    xs = np.linspace(0, 10, 1001)
    assert np.all(np.diff(y_survival(xs, b)) < 0) and y_survival(0.0, b) == 1.0


def test_aux_marginals():
    cfg = AuxProcessConfig(16)
    flag, y, z = sample_aux_marginals(cfg, 100000, seed=2)
    assert flag.mean() == pytest.approx(cfg.p_flag, abs=4 * math.sqrt(cfg.p_flag / 100000))
    ks = stats.kstest(y, lambda x: 1 - y_survival(x, cfg.b))
    assert ks.pvalue > 1e-3
    assert z.shape == (100000, 2) and np.all((z > 0) & (z < 1))


def test_aux_process_structure():
    cfg = AuxProcessConfig(4)
    phi = sample_phi(4, seed=3)
    s = sample_aux_process(cfg, phi, seed=4, regions=[(0.0, 0.5, 0.0, 0.5), (0.0, 1.0, 0.0, 1.0)])
    base = -2 * math.sqrt(G) * math.log(4)
    assert s.values.shape == (16,)
    assert s.maximum == s.values.max() == s.regional[(0.0, 1.0, 0.0, 1.0)]
    assert s.regional[(0.0, 0.5, 0.0, 0.5)] <= s.maximum
    inactive = s.values == base
    assert np.all(s.values[~inactive] != base)
    with pytest.raises(ValueError):
        sample_aux_process(AuxProcessConfig(2), phi, seed=1)


def test_dmart_vs_lattice_on_its_own_law():
    z = np.exp(np.random.default_rng(0).normal(0, 0.5, 5000))
    m = sample_max_from_z(z, seed=1)
    rep = dmart_vs_lattice_report(z, m + 0.3)
    assert rep.verdict == "pass"
    assert rep.details["shift"] == pytest.approx(0.3, abs=0.05)
    assert rep.estimate < 0.03
    assert implied_max_cdf(z, [np.inf, -np.inf]).tolist() == [1.0, 0.0]
