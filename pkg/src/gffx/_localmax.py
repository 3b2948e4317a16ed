"""r-local maxima: compiled scan, pure-Python fallback and a brute-force reference.

All three implement the same strict total order on sites: ``z`` beats ``x``
when ``h_z > h_x``, or ``h_z == h_x`` and ``z`` is lexicographically smaller.
Sites outside the box have height 0 and take part in the comparison.

The backend is chosen at import: the compiled extension when it is importable,
unless ``GFFX_PURE_PYTHON`` is set to a non-empty value other than ``0``.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["BACKEND", "HAVE_COMPILED", "local_maxima_mask", "local_maxima_mask_python", "local_maxima_mask_bruteforce", "ball_offsets"]


def ball_offsets(r: int) -> np.ndarray:
    """Offsets of ``Λ_r`` minus the origin, nearest first."""
    offs = [(d1, d2) for d1 in range(-r, r + 1) for d2 in range(-r, r + 1) if 0 < abs(d1) + abs(d2) <= r]
    offs.sort(key=lambda d: (abs(d[0]) + abs(d[1]), d[0], d[1]))
    return np.asarray(offs, dtype=np.intp).reshape(-1, 2)


def _check(h, r):
    if int(r) != r or r < 1:
        raise ValueError(f"radius r must be an integer >= 1, got {r}")
    h = np.ascontiguousarray(h, dtype=float)
    if h.ndim != 2:
        raise ValueError("field must be two-dimensional")
    return h, int(r)


def local_maxima_mask_bruteforce(h: np.ndarray, r: int) -> np.ndarray:
    """Reference implementation: compare every site with every offset of the ball."""
    h, r = _check(h, r)
    n1, n2 = h.shape
    pad = np.zeros((n1 + 2 * r, n2 + 2 * r))
    pad[r : r + n1, r : r + n2] = h
    keep = np.ones(h.shape, dtype=bool)
    for d1 in range(-r, r + 1):
        for d2 in range(-r, r + 1):
            if abs(d1) + abs(d2) > r or (d1 == 0 and d2 == 0):
                continue
            w = pad[r + d1 : r + d1 + n1, r + d2 : r + d2 + n2]
            lex_smaller = d1 < 0 or (d1 == 0 and d2 < 0)
            keep &= ~((w > h) | ((w == h) & lex_smaller))
    return keep


def local_maxima_mask_python(h: np.ndarray, r: int, threshold: float = -np.inf) -> np.ndarray:
    """Fallback: r rounds of nearest-neighbour max-dilation on (height, position) pairs.

    The l1 ball of radius r is the r-fold sum of the unit cross, so after r
    rounds each site holds the winner of its ball; a site is a local maximum
    exactly when it is its own winner.
    """
    h, r = _check(h, r)
    n1, n2 = h.shape
    m1, m2 = n1 + 2 * r, n2 + 2 * r
    val = np.zeros((m1, m2))
    val[r : r + n1, r : r + n2] = h
    idx = np.arange(m1 * m2, dtype=np.int64).reshape(m1, m2)
    own = idx.copy()
    for _ in range(r):
        best_v, best_i = val.copy(), idx.copy()
        for axis in (0, 1):
            for step in (1, -1):
                cv = np.full((m1, m2), -np.inf)
                ci = np.full((m1, m2), np.iinfo(np.int64).max)
                if axis == 0:
                    src = slice(0, m1 - 1) if step == 1 else slice(1, m1)
                    dst = slice(1, m1) if step == 1 else slice(0, m1 - 1)
                    cv[dst, :], ci[dst, :] = val[src, :], idx[src, :]
                else:
                    src = slice(0, m2 - 1) if step == 1 else slice(1, m2)
                    dst = slice(1, m2) if step == 1 else slice(0, m2 - 1)
                    cv[:, dst], ci[:, dst] = val[:, src], idx[:, src]
                better = (cv > best_v) | ((cv == best_v) & (ci < best_i))
                best_v = np.where(better, cv, best_v)
                best_i = np.where(better, ci, best_i)
        val, idx = best_v, best_i
    mask = (idx == own)[r : r + n1, r : r + n2]
    return mask & (h >= threshold)


try:
    if os.environ.get("GFFX_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from ._kernels import local_maxima_scan as _scan

    BACKEND = "compiled"
except ImportError:
    _scan = None
    BACKEND = "python"

HAVE_COMPILED = _scan is not None


def local_maxima_mask(h: np.ndarray, r: int, threshold: float = -np.inf) -> np.ndarray:
    """Mask of r-local maxima with height ``>= threshold``, using the active backend."""
    h, r = _check(h, r)
    if _scan is None:
        return local_maxima_mask_python(h, r, threshold)
    return _scan(h, r, float(threshold))
