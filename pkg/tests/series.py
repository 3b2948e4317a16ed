"""Single-sum sine series for the Dirichlet problem on the unit square (test oracles)."""

import math

import numpy as np


def _sinh_ratio(a, b, c):
    """``sinh(a) sinh(b) / sinh(c)`` for ``0 <= a, b`` and ``a + b <= c``, without overflow."""
    return 0.5 * np.exp(a + b - c) * (-np.expm1(-2 * a)) * (-np.expm1(-2 * b)) / (-np.expm1(-2 * c))


def green_square(x, y, terms=4000):
    """Dirichlet Green function of ``-Δ`` on ``(0, 1)^2``, ``~ -(1/2π) log|x - y|``."""
    m = np.arange(1, terms + 1) * math.pi
    lo, hi = min(x[1], y[1]), max(x[1], y[1])
    g = _sinh_ratio(m * lo, m * (1 - hi), m) / m
    return float(np.sum(2 * np.sin(m * x[0]) * np.sin(m * y[0]) * g))


def exit_left(x, terms=400):
    """Probability that Brownian motion from ``x`` leaves the square through ``{0} x (0, 1)``."""
    k = np.arange(1, 2 * terms, 2)
    a, c = k * math.pi * (1 - x[0]), k * math.pi
    ratio = np.exp(a - c) * (-np.expm1(-2 * a)) / (-np.expm1(-2 * c))  # sinh(a) / sinh(c)
    return float(np.sum(4 / (k * math.pi) * np.sin(k * math.pi * x[1]) * ratio))
