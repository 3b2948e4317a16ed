"""Harmonic measure of the unit square and the covariance ``C_K`` of the continuum coarse field.

Write ``R(x, y) = ∫_{∂B} Π(x, dz) log|z - y|`` for the unit square ``B``.
Then ``R(x, y) - log|x - y| = 2π G_B(x, y)`` with ``G_B`` the Dirichlet
Green function normalised as ``-(1/2π) log|x - y|`` at the diagonal, and

    C_K(x, y) = R(x, y) - log|x - y|                  different sub-squares,
    C_K(x, y) = R(x, y) - R(x', y') + log K           same sub-square,

where ``x' = K (x - w_i)`` is the position relative to the sub-square.  In the
default mode the result is multiplied by ``g`` so that ``C_K(x, x)`` grows
like ``g log K``, matching the lattice coarse field.

Two independent evaluations of ``R`` are provided: boundary quadrature of the
exact Poisson kernel (``quadrature``) and an image series for ``G_B`` built
from the Green function of the strip ``(0, 1) x R`` (``closed-form``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from ..constants import G
from ..field import LatticeBox, green_operator
from ..rng import generator

__all__ = [
    "Arc",
    "SIDES",
    "harmonic_measure",
    "poisson_kernel",
    "poisson_arc_integral",
    "R_matrix",
    "R_closed",
    "variance_ck",
    "mean_variance_ck",
    "covariance_ck",
    "covariance_matrix",
    "subsquare_index",
    "coarse_field_cov_oracle",
    "coarse_field_cov_exact",
]

SIDES = ("bottom", "right", "top", "left")
_IMAGES = 8
_BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Arc:
    """Boundary segment ``{z(s) : s0 <= s <= s1}`` of one side of the unit square.

    Sides are parametrised as bottom ``(s, 0)``, right ``(1, s)``, top
    ``(s, 1)`` and left ``(0, s)``.
    """

    side: str
    s0: float = 0.0
    s1: float = 1.0

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"unknown side {self.side!r}")
        if not 0.0 <= self.s0 <= self.s1 <= 1.0:
            raise ValueError("arc parameters must satisfy 0 <= s0 <= s1 <= 1")


def _arcs(arc) -> list[Arc]:
    if isinstance(arc, Arc):
        return [arc]
    if isinstance(arc, str):
        return [Arc("bottom"), Arc("right"), Arc("top"), Arc("left")] if arc == "all" else [Arc(arc)]
    return list(arc)


def _to_side_frame(x: np.ndarray, side: str) -> np.ndarray:
    """Map points so that ``side`` becomes the bottom, keeping the arc parameter."""
    x1, x2 = x[..., 0], x[..., 1]
    if side == "bottom":
        return np.stack([x1, x2], axis=-1)
    if side == "top":
        return np.stack([x1, 1.0 - x2], axis=-1)
    if side == "left":
        return np.stack([x2, x1], axis=-1)
    return np.stack([x2, 1.0 - x1], axis=-1)


def _side_point(side: str, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    z = {"bottom": (s, 0 * s), "right": (1 + 0 * s, s), "top": (s, 1 + 0 * s), "left": (0 * s, s)}[side]
    return np.stack(z, axis=-1)


def _check_interior(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 2:
        raise ValueError("points must have two coordinates")
    if np.any(x <= _BOUNDARY_TOL) or np.any(x >= 1.0 - _BOUNDARY_TOL):
        raise ValueError("points must lie strictly inside the unit square")
    return x


def poisson_kernel(x, side: str, s) -> np.ndarray:
    """Density of ``Π(x, ·)`` with respect to arclength on ``side`` at parameter ``s``.

    Exact image series (reflections in the sides parallel to ``side``).
    Broadcasts over ``x`` (``(..., 2)``) and ``s``.
    """
    x = _to_side_frame(_check_interior(x), side)
    x1, x2 = x[..., 0][..., None], x[..., 1][..., None]
    s = np.asarray(s, dtype=float)
    out = 0.0
    sx, ss = np.sin(np.pi * x1), np.sin(np.pi * s)
    cm, cp = np.cos(np.pi * (x1 - s)), np.cos(np.pi * (x1 + s))
    for k in range(-_IMAGES, _IMAGES + 1):
        d = np.pi * (x2 - 2 * k)
        ch = np.cosh(d)
        out = out + np.sinh(d) * sx * ss / ((ch - cm) * (ch - cp))
    return out


def poisson_arc_integral(x, arc, nodes: int = 64) -> float:
    """``Π(x, arc)`` by Gauss–Legendre panels over the exact Poisson kernel."""
    x = _check_interior(np.asarray(x, dtype=float))
    total = 0.0
    for a in _arcs(arc):
        if a.s1 == a.s0:
            continue
        s, w = _panel_nodes(a.s0, a.s1, _projection_scales(x[None, :], a.side), nodes)
        total += float(poisson_kernel(x, a.side, s) @ w)
    return total


# ------------------------------------------------------- discrete harmonic measure


def _discrete_solution(arcs: list[Arc], M: int) -> np.ndarray:
    """Discrete harmonic function on the ``(M+1)^2`` grid with arc-indicator boundary data.

    A boundary node at ``s = j/M`` carries the fraction of ``[s - 1/2M, s + 1/2M]``
    covered by the arcs, which keeps the error second order in ``1/M``.
    """
    s = np.arange(1, M) / M
    lo, hi = s - 0.5 / M, s + 0.5 / M
    data = {side: np.zeros(M - 1) for side in SIDES}
    for a in arcs:
        data[a.side] += np.clip(np.minimum(hi, a.s1) - np.maximum(lo, a.s0), 0.0, None) * M
    rhs = np.zeros((M - 1, M - 1))  # rhs[i-1, j-1] for node (i/M, j/M)
    rhs[:, 0] += data["bottom"]
    rhs[:, -1] += data["top"]
    rhs[0, :] += data["left"]
    rhs[-1, :] += data["right"]
    c = np.cos(np.pi * np.arange(1, M) / M)
    lam = 4.0 - 2.0 * c[:, None] - 2.0 * c[None, :]
    u = sfft.dstn(sfft.dstn(rhs, type=1, norm="ortho") / lam, type=1, norm="ortho")
    full = np.zeros((M + 1, M + 1))
    full[1:M, 1:M] = u
    full[1:M, 0], full[1:M, M] = data["bottom"], data["top"]
    full[0, 1:M], full[M, 1:M] = data["left"], data["right"]
    return full


def _bilinear(full: np.ndarray, x: np.ndarray) -> float:
    M = full.shape[0] - 1
    p = x * M
    i = min(int(p[0]), M - 1)
    j = min(int(p[1]), M - 1)
    fx, fy = p[0] - i, p[1] - j
    return float(
        full[i, j] * (1 - fx) * (1 - fy)
        + full[i + 1, j] * fx * (1 - fy)
        + full[i, j + 1] * (1 - fx) * fy
        + full[i + 1, j + 1] * fx * fy
    )


def harmonic_measure(x, arc, resolution: int = 256, details: bool = False):
    """``Π(x, arc)``: probability that Brownian motion from ``x`` leaves the square through ``arc``.

    Solves the discrete Dirichlet problem on grids of ``M = resolution`` and
    ``2M`` cells per side, interpolates bilinearly and returns the Richardson
    combination ``(4 u_{2M} - u_M) / 3``.  With ``details=True`` the pair
    ``(value, info)`` is returned, where ``info`` holds both raw values and
    whether they agree within ``1e-4``.
    """
    x = _check_interior(np.asarray(x, dtype=float).reshape(2))
    arcs = _arcs(arc)
    u1 = _bilinear(_discrete_solution(arcs, resolution), x)
    u2 = _bilinear(_discrete_solution(arcs, 2 * resolution), x)
    value = (4.0 * u2 - u1) / 3.0
    if details:
        return value, {"coarse": u1, "fine": u2, "richardson_ok": abs(u2 - u1) <= 1e-4}
    return value


# ------------------------------------------------------------- R(x, y) by quadrature


def _gl(q: int):
    return np.polynomial.legendre.leggauss(q)


def _projection_scales(points: np.ndarray, side: str) -> list[tuple[float, float]]:
    """(arc parameter, distance to the side) of every point's projection onto ``side``."""
    p = _to_side_frame(points, side)
    return list(zip(p[:, 0].tolist(), p[:, 1].tolist()))


def _panel_nodes(a: float, b: float, centres, q: int, base: int = 8):
    """Composite Gauss–Legendre nodes on ``[a, b]``, graded geometrically toward centres."""
    cuts = set(np.linspace(a, b, base + 1).tolist())
    for c, d in centres:
        d = max(d, 1e-12)
        cuts.add(min(max(c, a), b))
        step = d
        while step < 2.0:
            for e in (c - step, c + step):
                if a < e < b:
                    cuts.add(e)
            step *= 2.0
    cuts = np.array(sorted(cuts))
    cuts = cuts[np.concatenate([[True], np.diff(cuts) > 1e-15])]
    t, w = _gl(q)
    left, right = cuts[:-1], cuts[1:]
    half = 0.5 * (right - left)
    s = (0.5 * (left + right))[:, None] + half[:, None] * t[None, :]
    wt = half[:, None] * w[None, :]
    return s.ravel(), wt.ravel()


def _unique_rows(p: np.ndarray, decimals: int = 12) -> np.ndarray:
    return np.unique(np.round(p, decimals), axis=0)


def R_matrix_quadrature(X, Y, resolution: int = 8, q: int = 16) -> np.ndarray:
    """``R(X_i, Y_j)`` by quadrature of the exact Poisson kernel on each side."""
    X = _check_interior(np.asarray(X, dtype=float).reshape(-1, 2))
    Y = _check_interior(np.asarray(Y, dtype=float).reshape(-1, 2))
    both = _unique_rows(np.vstack([X, Y]))
    out = np.zeros((len(X), len(Y)))
    for side in SIDES:
        s, w = _panel_nodes(0.0, 1.0, _projection_scales(both, side), q, base=resolution)
        P = poisson_kernel(X, side, s) * w[None, :]
        z = _side_point(side, s)
        logd = 0.5 * np.log(((z[:, None, :] - Y[None, :, :]) ** 2).sum(-1))
        out += P @ logd
    return out


# ---------------------------------------------------------- R(x, y) in closed form


def _strip_green_2pi(x1, x2, y1, y2) -> np.ndarray:
    """``2π`` times the Dirichlet Green function of the strip ``(0, 1) x R``."""
    d = np.pi * (x2 - y2) / 2.0
    A = 2.0 * np.sinh(d) ** 2
    a = 2.0 * np.sin(np.pi * (x1 + y1) / 2.0) ** 2
    b = 2.0 * np.sin(np.pi * (x1 - y1) / 2.0) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        return 0.5 * np.log1p((a - b) / (A + b))


def R_closed(X, Y) -> np.ndarray:
    """``R(X, Y)`` from the image series of the strip Green function, broadcasting over leading axes."""
    X = _check_interior(np.asarray(X, dtype=float))
    Y = _check_interior(np.asarray(Y, dtype=float))
    x1, x2 = X[..., 0], X[..., 1]
    y1, y2 = Y[..., 0], Y[..., 1]
    dist2 = (x1 - y1) ** 2 + (x2 - y2) ** 2
    same = dist2 < 1e-28
    total = np.zeros(np.broadcast(x1, y1).shape)
    for k in range(-_IMAGES, _IMAGES + 1):
        total = total - _strip_green_2pi(x1, x2, y1, 2 * k - y2)
        if k == 0:
            continue
        total = total + _strip_green_2pi(x1, x2, y1, y2 + 2 * k)
    # direct k = 0 term combined with log|x - y| (finite on the diagonal)
    d = np.pi * (x2 - y2) / 2.0
    A = 2.0 * np.sinh(d) ** 2
    a = 2.0 * np.sin(np.pi * (x1 + y1) / 2.0) ** 2
    b = 2.0 * np.sin(np.pi * (x1 - y1) / 2.0) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = 0.5 * np.log(A + a) - 0.5 * np.log((A + b) / np.where(same, 1.0, dist2))
    diag = np.log((2.0 / np.pi) * np.sin(np.pi * np.broadcast_to(x1, total.shape)))
    return total + np.where(same, diag, direct)


def R_matrix_closed(X, Y) -> np.ndarray:
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    Y = np.asarray(Y, dtype=float).reshape(-1, 2)
    return R_closed(X[:, None, :], Y[None, :, :])


def R_matrix(X, Y, method: str = "closed-form", resolution: int = 8) -> np.ndarray:
    if method == "closed-form":
        return R_matrix_closed(X, Y)
    if method == "quadrature":
        return R_matrix_quadrature(X, Y, resolution)
    raise ValueError(f"unknown method {method!r}")


# -------------------------------------------------------------------- C_K


def subsquare_index(x, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Sub-square index ``i = a K + b`` of ``w = (a/K, b/K)`` and the relative position ``K (x - w)``."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    p = x * K
    cell = np.floor(p)
    rel = p - cell
    if np.any(rel <= _BOUNDARY_TOL * K) or np.any(rel >= 1.0 - _BOUNDARY_TOL * K) or np.any(x <= 0) or np.any(x >= 1):
        raise ValueError("points must lie strictly inside a sub-square")
    idx = (cell[:, 0] * K + cell[:, 1]).astype(int)
    return idx, rel


def covariance_matrix(
    K: int,
    X,
    Y=None,
    method: str = "closed-form",
    g_scaled: bool = True,
    resolution: int = 8,
) -> np.ndarray:
    """``C_K(X_i, Y_j)``; ``Y`` defaults to ``X``."""
    if int(K) != K or K < 1:
        raise ValueError("K must be a positive integer")
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    Y = X if Y is None else np.asarray(Y, dtype=float).reshape(-1, 2)
    ix, rx = subsquare_index(X, K)
    iy, ry = subsquare_index(Y, K)
    R = R_matrix(X, Y, method, resolution)
    C = np.empty_like(R)
    same = ix[:, None] == iy[None, :]
    with np.errstate(divide="ignore"):
        logd = 0.5 * np.log(((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1))
    C[~same] = (R - logd)[~same]
    if same.any():
        Rl = R_matrix(rx, ry, method, resolution)
        C[same] = (R - Rl + math.log(K))[same]
    return G * C if g_scaled else C


def variance_ck(K: int, X, g_scaled: bool = True) -> np.ndarray:
    """``C_K(x, x)`` for every row of ``X`` (closed form, elementwise)."""
    X = np.asarray(X, dtype=float).reshape(-1, 2)
    _, rel = subsquare_index(X, K)
    v = R_closed(X, X) - R_closed(rel, rel) + math.log(K)
    return G * v if g_scaled else v


def mean_variance_ck(K: int, n: int = 16, g_scaled: bool = True) -> float:
    """Average of ``C_K(x, x)`` over the unit square.

    Because ``x`` uniform on the square makes ``K (x - w_i)`` uniform as well,
    the average equals ``g log K`` exactly; it is computed here with an
    ``n x n`` Gauss–Legendre rule on every sub-square, after the substitution
    ``u -> u^3 (10 - 15u + 6u^2)`` in each coordinate which flattens the
    logarithmic singularity of ``R(x, x)`` at the sub-square edges.
    """
    t, w = np.polynomial.legendre.leggauss(n)
    v = 0.5 * (t + 1.0)
    u = v**3 * (10.0 - 15.0 * v + 6.0 * v**2)
    wu = 0.5 * w * 30.0 * v**2 * (1.0 - v) ** 2
    rel = np.array([(a, b) for a in u for b in u])
    wt = np.outer(wu, wu).ravel()
    corners = np.array([(a, b) for a in range(K) for b in range(K)], dtype=float)
    X = ((corners[:, None, :] + rel[None, :, :]) / K).reshape(-1, 2)
    v = variance_ck(K, X, g_scaled).reshape(K * K, -1)
    return float((v @ wt).mean())


def covariance_ck(K: int, x, y, resolution: int = 8, method: str = "quadrature", g_scaled: bool = True) -> float:
    """``C_K(x, y)`` (times ``g`` in the default mode) by boundary quadrature of harmonic measure."""
    return float(covariance_matrix(K, np.reshape(x, (1, 2)), np.reshape(y, (1, 2)), method, g_scaled, resolution)[0, 0])


# ------------------------------------------------------- lattice coarse field


def _lattice_site(x, N: int) -> tuple[int, int]:
    s = tuple(int(math.ceil(N * float(c) - 1e-9)) for c in x)
    LatticeBox(N).check_site(s)
    return s


def coarse_field_cov_exact(N: int, K: int, x, y) -> float:
    """Exact ``Cov(h^c_a, h^c_b)`` for ``a = ceil(N x)``, ``b = ceil(N y)``.

    Equals ``G_N(a, b)`` minus the sub-box Green function when ``a`` and ``b``
    share a sub-box (the fine field is independent of the coarse one).
    """
    if N % K:
        raise ValueError(f"N={N} not divisible by K={K}")
    a, b = _lattice_site(x, N), _lattice_site(y, N)
    L = N // K
    cov = green_operator(N)(a, b)
    ba = ((a[0]) // L, (a[1]) // L)
    bb = ((b[0]) // L, (b[1]) // L)
    on_line = a[0] % L == 0 or a[1] % L == 0 or b[0] % L == 0 or b[1] % L == 0
    if ba == bb and not on_line and L > 1:
        off = (ba[0] * L, ba[1] * L)
        cov -= green_operator(L)((a[0] - off[0], a[1] - off[1]), (b[0] - off[0], b[1] - off[1]))
    return float(cov)


def coarse_field_cov_oracle(
    N: int, K: int, x, y, replicates: int, seed: int = 0, batch: int = 256
) -> tuple[float, float]:
    """Monte Carlo covariance of the lattice coarse field at ``ceil(N x)``, ``ceil(N y)``.

    Returns the estimate and its bootstrap standard error.
    """
    from ..field import harmonic_extension, sample_batch
    from ..reports import bootstrap_stderr

    if N % K:
        raise ValueError(f"N={N} not divisible by K={K}")
    a, b = _lattice_site(x, N), _lattice_site(y, N)
    rng = generator(seed)
    va, vb = [], []
    done = 0
    while done < replicates:
        n = min(batch, replicates - done)
        fields = sample_batch(N, int(rng.integers(0, 2**63)), n)
        hc = harmonic_extension(fields, K)
        va.append(hc[:, a[0] - 1, a[1] - 1])
        vb.append(hc[:, b[0] - 1, b[1] - 1])
        done += n
    pairs = np.column_stack([np.concatenate(va), np.concatenate(vb)])

    def cov(p):
        return float(np.mean(p[:, 0] * p[:, 1]))  # both coordinates are mean zero

    return cov(pairs), bootstrap_stderr(pairs, cov, seed=seed + 1)
