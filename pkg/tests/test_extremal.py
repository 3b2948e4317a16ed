import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gffx.constants import G
from gffx.extremal import (
    daviaud_d,
    daviaud_exponent,
    daviaud_from_counts,
    default_radius,
    extract_eta,
    level_set,
    level_set_diagnostics,
    local_maxima,
    max_sample,
    oscillation,
    top_l_sum,
)
from gffx.field import centering_mn, sample_batch, sample_field


@pytest.mark.parametrize("N,r", [(2, 2), (4, 2), (16, 4), (17, 5), (512, 23), (1024, 32)])
def test_default_radius(N, r):
    assert default_radius(N) == r
    assert r == math.ceil(math.sqrt(N))


@pytest.mark.parametrize("s", [0.2, 0.8, 1.2])
def test_daviaud_exponent_formula(s):
    assert daviaud_d(s) == pytest.approx(2 - s * s * math.pi / 4, abs=1e-15)
    assert daviaud_d(0.8) == pytest.approx(2 - 0.16 * math.pi)


def test_eta_points_are_thresholded_local_maxima():
    h = sample_field(64, seed=3)
    eta = extract_eta(h, r=4, lam=3.0)
    mN = centering_mn(64)
    assert eta.meta["N"] == 64 and eta.meta["r"] == 4 and eta.meta["lam"] == 3.0
    assert eta.meta["seed"] == 3
    assert np.all(eta.h >= -3.0)
    sites = np.rint(eta.x * 64).astype(int)
    lm = {tuple(s) for s in local_maxima(h, 4)}
    assert {tuple(s) for s in sites} <= lm
    assert np.allclose(eta.h, h.values[sites[:, 0] - 1, sites[:, 1] - 1] - mN)
    expected = sum(h.values[a - 1, b - 1] >= mN - 3.0 for a, b in lm)
    assert len(eta) == expected


def test_top_point_of_eta_is_the_maximum():
    fields = sample_batch(32, 11, 20)
    ms = max_sample(fields)
    for v, m, pos in zip(fields, ms.max_centered, ms.position):
        eta = extract_eta(v, r=3, lam=50.0)
        k = int(np.argmax(eta.h))
        assert eta.h[k] == m
        assert np.allclose(eta.x[k], pos)


def test_max_sample_first_occurrence_on_ties():
    v = np.zeros((3, 3))
    v[0, 2] = v[2, 0] = 5.0
    ms = max_sample([v])
    assert np.allclose(ms.position[0], [1 / 4, 3 / 4])
    assert ms.max_centered[0] == 5.0 - centering_mn(4)


def test_max_sample_rejects_mixed_sizes():
    with pytest.raises(ValueError):
        max_sample([np.zeros((3, 3)), np.zeros((4, 4))])


@given(arrays(np.float64, (5, 5), elements=st.floats(-10, 10)), st.integers(1, 25))
def test_top_l_sum_matches_sorting(v, ell):
    s, sites = top_l_sum(v, ell)
    assert s == pytest.approx(np.sort(v.ravel())[::-1][:ell].sum(), abs=1e-9)
    assert len({tuple(x) for x in sites}) == ell
    assert s == pytest.approx(v[sites[:, 0] - 1, sites[:, 1] - 1].sum(), abs=1e-12)


def test_top_l_sum_bad_ell():
    with pytest.raises(ValueError):
        top_l_sum(np.zeros((2, 2)), 5)


def test_level_set_and_oscillation():
    h = sample_field(32, seed=1)
    mN = centering_mn(32)
    ls = level_set(h, 2.0)
    assert len(ls) == int((h.values >= mN - 2.0).sum())
    region = np.zeros((31, 31), dtype=bool)
    region[:4, :4] = True
    osc = oscillation(h, region)
    assert osc == np.ptp(h.values[:4, :4])
    sites = np.argwhere(region) + 1
    assert oscillation(h, sites) == osc
    with pytest.raises(ValueError):
        oscillation(h, np.zeros((31, 31), dtype=bool))


def test_daviaud_from_counts_exact_power():
    N, s = 256, 0.8
    count = round(N ** daviaud_d(s))
    rep = daviaud_from_counts([count] * 10, N, s)
    assert rep.estimate == pytest.approx(math.log(count) / math.log(N))
    assert rep.verdict == "pass"
    assert rep.details["d_s"] == daviaud_d(s)


@pytest.mark.parametrize("s", [0.0, -0.1, 2 * math.sqrt(G)])
def test_daviaud_rejects_s_out_of_range(s):
    with pytest.raises(ValueError):
        daviaud_from_counts([1], 64, s)


def test_daviaud_exponent_counts_from_fields():
    fields = sample_batch(32, 5, 8)
    rep = daviaud_exponent(fields, 0.5)
    counts = [(v >= 0.5 * math.log(32)).sum() for v in fields]
    assert rep.estimate == pytest.approx(np.mean(np.log(np.maximum(counts, 1)) / math.log(32)))


def test_level_set_diagnostics_bookkeeping():
    fields = sample_batch(32, 9, 100)
    rep, test = level_set_diagnostics(fields, lam=3.0, rho=0.1, r=3)
    mN = centering_mn(32)
    sizes = [(v >= mN - 3.0).sum() for v in fields]
    assert np.array_equal(rep.sizes, sizes)
    assert np.all(rep.bulk_exclusion <= rep.sizes)
    n_pairs = sum(s * (s - 1) // 2 for s in sizes)
    assert sum(rep.separation_histogram.values()) == n_pairs
    assert 0.0 <= test.estimate <= 1.0
    with pytest.raises(ValueError):
        level_set_diagnostics(fields[:10], lam=3.0, rho=0.1, r=3)
