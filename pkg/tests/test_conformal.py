import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from gffx.dmart.conformal import (
    LEMNISCATE,
    PSI_MAX,
    conformal_derivative,
    conformal_map,
    psi_cell_masses,
    psi_density,
    sample_psi,
)
from tests.series import green_square

CENTRE = (0.5, 0.5)
off_axis = st.floats(0.05, 0.95).filter(lambda v: abs(v - 0.5) > 0.02)


def test_lemniscate_constant():
    lem = 2 * integrate.quad(lambda t: 1 / math.sqrt(1 - t**4), 0, 1)[0]
    assert LEMNISCATE == pytest.approx(lem, rel=1e-12)
    assert LEMNISCATE == pytest.approx(2.622057554292119810464839589891, rel=1e-14)


def test_psi_at_centre():
    assert psi_density(CENTRE) == pytest.approx(3 * LEMNISCATE**2 / (2 * math.pi), rel=1e-14)
    assert PSI_MAX == pytest.approx(psi_density(CENTRE), rel=1e-14)
    assert abs(conformal_map(np.array(CENTRE))) < 1e-15


@settings(max_examples=20)
@given(st.floats(0.05, 0.95), off_axis)
def test_modulus_is_the_exponentiated_green_function(x1, x2):
    x = (x1, x2)
    g = abs(conformal_map(np.array(x)))
    assert g == pytest.approx(math.exp(-2 * math.pi * green_square(x, CENTRE)), abs=1e-9)


@pytest.mark.parametrize("x", [(0.2, 0.3), (0.7, 0.85), (0.45, 0.1)])
def test_derivative_is_the_green_gradient(x):
    eps = 1e-5
    grad = [
        (green_square(np.add(x, e), CENTRE) - green_square(np.subtract(x, e), CENTRE)) / (2 * eps)
        for e in ((eps, 0.0), (0.0, eps))
    ]
    g = abs(conformal_map(np.array(x)))
    assert conformal_derivative(np.array(x)) == pytest.approx(g * 2 * math.pi * math.hypot(*grad), rel=1e-6)


def test_map_is_onto_the_disc_and_symmetric():
    c = np.linspace(0.01, 0.99, 41)
    X = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1)
    w = conformal_map(X)
    assert np.all(np.abs(w) < 1)
    assert np.abs(conformal_map(np.array([1e-8, 0.5]))) == pytest.approx(1.0, abs=1e-6)
    p = psi_density(X)
    assert np.allclose(p, p[::-1, :]) and np.allclose(p, p.T)


def test_psi_is_a_probability_density():
    total = integrate.dblquad(lambda y, x: psi_density((x, y)), 1e-8, 1 - 1e-8, 1e-8, 1 - 1e-8, epsabs=1e-10)[0]
    assert total == pytest.approx(1.0, abs=1e-7)
    assert psi_cell_masses(4).sum() == pytest.approx(1.0, abs=1e-4)


def test_psi_sampler():
    pts = sample_psi(40000, seed=3)
    assert pts.shape == (40000, 2)
    emp = np.histogram2d(pts[:, 0], pts[:, 1], bins=4, range=[[0, 1], [0, 1]])[0] / len(pts)
    masses = psi_cell_masses(4)
    chi2 = float((((emp - masses) * len(pts)) ** 2 / (masses * len(pts))).sum())
    assert special.chdtrc(15, chi2) > 1e-3
    assert np.array_equal(sample_psi(10, 1), sample_psi(10, 1))


@pytest.mark.parametrize("x", [(0.0, 0.5), (0.5, 1.0), (1.2, 0.5)])
def test_boundary_points_rejected(x):
    with pytest.raises(ValueError):
        psi_density(x)
