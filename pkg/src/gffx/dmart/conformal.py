"""The argmax density ``ψ`` of the unit square via its conformal map onto the disc.

``ψ(x) = (3/π) (1 - |g(x)|^2)^2 |g'(x)|^2`` where ``g`` maps ``(0, 1)^2`` onto the
unit disc with ``g(1/2, 1/2) = 0``.  The map is built from the lemniscatic sine
``sl``, which sends the square with vertices ``±ϖ/2, ±iϖ/2`` onto the disc:
after rotating the unit square by ``π/4`` and scaling it onto that square,
``g = sl``.  ``sl(z) = sd(√2 z | m = 1/2) / √2`` is evaluated for complex
argument with the Jacobi addition formulas, and ``sl'^2 = 1 - sl^4`` gives
the derivative exactly.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

from ..rng import generator

__all__ = [
    "LEMNISCATE",
    "conformal_map",
    "conformal_derivative",
    "psi_density",
    "psi_cell_masses",
    "sample_psi",
    "PSI_MAX",
]

#: Lemniscate constant ``ϖ = Γ(1/4)^2 / (2 √(2π))``.
LEMNISCATE = special.gamma(0.25) ** 2 / (2.0 * math.sqrt(2.0 * math.pi))
_SCALE = (LEMNISCATE / 2.0) * math.sqrt(2.0)  # half-diagonal 1/√2 -> ϖ/2
_ROT = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
_BOUNDARY = 1e-9

#: ``ψ`` at the centre, its maximum.
PSI_MAX = 3.0 / math.pi * _SCALE**2


def _to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("points must have two coordinates")
    if np.any(x < _BOUNDARY) or np.any(x > 1.0 - _BOUNDARY):
        raise ValueError("ψ is defined on the open unit square (points within 1e-9 of the boundary are rejected)")
    return (x[..., 0] - 0.5) + 1j * (x[..., 1] - 0.5)


def _sd_complex(u: np.ndarray) -> np.ndarray:
    """``sd(u | 1/2) = sn/dn`` for complex ``u``."""
    s, c, d, _ = special.ellipj(u.real, 0.5)
    s1, c1, d1, _ = special.ellipj(u.imag, 0.5)
    den = c1**2 + 0.5 * s**2 * s1**2
    sn = (s * d1 + 1j * c * d * s1 * c1) / den
    dn = (d * c1 * d1 - 1j * 0.5 * s * c * s1) / den
    return sn / dn


def conformal_map(x) -> np.ndarray:
    """``g(x)``: conformal bijection of the unit square onto the disc, centre to 0."""
    z = _to_complex(x) * _ROT * _SCALE
    return _sd_complex(math.sqrt(2.0) * z) / math.sqrt(2.0)


def conformal_derivative(x) -> np.ndarray:
    """``|g'(x)| = sqrt|1 - g^4| * ϖ/√2``."""
    w = conformal_map(x)
    return np.sqrt(np.abs(1.0 - w**4)) * _SCALE


def psi_density(x) -> np.ndarray | float:
    w = conformal_map(x)
    r2 = np.abs(w) ** 2
    val = 3.0 / math.pi * (1.0 - r2) ** 2 * np.abs(1.0 - w**4) * _SCALE**2
    return float(val) if np.ndim(val) == 0 else val


@lru_cache(maxsize=16)
def _psi_cells(k: int, per_cell: int) -> np.ndarray:
    n = k * per_cell
    c = (np.arange(n) + 0.5) / n
    X = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1)
    vals = psi_density(X) / (n * n)
    return vals.reshape(k, per_cell, k, per_cell).sum(axis=(1, 3))


def psi_cell_masses(k: int, per_cell: int = 64) -> np.ndarray:
    """``ψ``-mass of each cell of the ``k x k`` grid (midpoint rule)."""
    return _psi_cells(int(k), int(per_cell)).copy()


def sample_psi(n: int, seed: int) -> np.ndarray:
    """``n`` points with density ``ψ`` by rejection from the uniform law."""
    rng = generator(seed)
    out = np.empty((0, 2))
    while len(out) < n:
        m = max(64, int(1.3 * PSI_MAX * (n - len(out))))
        cand = rng.random((m, 2))
        cand = cand[(cand > _BOUNDARY).all(axis=1) & (cand < 1 - _BOUNDARY).all(axis=1)]
        keep = rng.random(len(cand)) * PSI_MAX < psi_density(cand)
        out = np.vstack([out, cand[keep]])
    return out[:n]
