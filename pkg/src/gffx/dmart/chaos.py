"""The continuum coarse field ``Φ_K``, the measures ``Z_K`` and the auxiliary maximum process."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Sequence

import numpy as np
from scipy import optimize, special

from ..constants import ALPHA, TWO_SQRT_G
from ..measures import CellMeasure, MaxSample
from ..reports import FAIL, PASS, TestReport
from ..rng import generator, substream
from .conformal import psi_density, sample_psi
from .harmonic import covariance_matrix

__all__ = [
    "SquarePartition",
    "ContinuumCovariance",
    "ContinuumFieldSample",
    "AuxProcessConfig",
    "AuxSample",
    "assemble_covariance",
    "sample_phi",
    "sample_phi_batch",
    "weight_f",
    "zk_measure",
    "zk_totals",
    "default_b_k",
    "delta_schedule",
    "y_survival",
    "sample_y",
    "sample_aux_marginals",
    "sample_aux_process",
    "implied_max_cdf",
    "dmart_vs_lattice_report",
    "MAX_NODES",
]

MAX_NODES = 4096
JITTER = 1e-10


def delta_schedule(K: int) -> float:
    """K-dependent margin ``δ_K = 1 / log(K + 2)``."""
    return 1.0 / math.log(K + 2)


@dataclass(frozen=True)
class SquarePartition:
    """``K x K`` tiling of the unit square with ``n x n`` midpoint nodes per sub-square.

    Node ``z`` (relative to its sub-square) sits at ``δ + (1 - 2δ)(j + 1/2)/n``
    in each coordinate.  Sub-square ``i = a K + b`` has anchor ``w_i = (a, b)/K``;
    nodes are ordered by sub-square, then row-major within it.
    """

    K: int
    n: int = 2
    delta: float = 0.1

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("need at least one node per sub-square")
        if not 0.0 <= self.delta < 0.5:
            raise ValueError("margin delta must lie in [0, 1/2)")

    @property
    def anchors(self) -> np.ndarray:
        a = np.arange(self.K)
        return np.array([(p, q) for p in a for q in a], dtype=float) / self.K

    @property
    def relative_nodes(self) -> np.ndarray:
        c = self.delta + (1.0 - 2.0 * self.delta) * (np.arange(self.n) + 0.5) / self.n
        return np.array([(p, q) for p in c for q in c])

    @property
    def node_weight(self) -> float:
        """Quadrature weight of a node in the relative coordinate ``z``."""
        return (1.0 - 2.0 * self.delta) ** 2 / self.n**2

    def nodes(self) -> np.ndarray:
        return (self.anchors[:, None, :] + self.relative_nodes[None, :, :] / self.K).reshape(-1, 2)

    @property
    def size(self) -> int:
        return self.K * self.K * self.n * self.n


@dataclass
class ContinuumCovariance:
    K: int
    points: np.ndarray
    matrix: np.ndarray
    method: str
    g_scaled: bool = True
    resolution: int = 8


@dataclass
class ContinuumFieldSample:
    partition: SquarePartition
    values: np.ndarray
    seed: int
    g_scaled: bool = True

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def points(self) -> np.ndarray:
        return self.partition.nodes()

    def by_subsquare(self) -> np.ndarray:
        """Values reshaped to ``(K^2, n^2)``."""
        return self.values.reshape(self.K * self.K, -1)


def assemble_covariance(
    part: SquarePartition, method: str = "closed-form", g_scaled: bool = True, resolution: int = 8
) -> ContinuumCovariance:
    pts = part.nodes()
    if len(pts) > MAX_NODES:
        raise ValueError(f"{len(pts)} nodes exceed the cap of {MAX_NODES}")
    C = covariance_matrix(part.K, pts, method=method, g_scaled=g_scaled, resolution=resolution)
    C = 0.5 * (C + C.T)
    return ContinuumCovariance(part.K, pts, C, method, g_scaled, resolution)


@lru_cache(maxsize=8)
def _factor(K: int, n: int, delta: float, g_scaled: bool) -> np.ndarray:
    part = SquarePartition(K, n, delta)
    if K == 1:
        return np.zeros((part.size, part.size))
    C = assemble_covariance(part, g_scaled=g_scaled).matrix
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(C + JITTER * np.eye(len(C)))
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(C)
        raise np.linalg.LinAlgError(
            f"C_K is not positive semi-definite beyond jitter {JITTER}: "
            f"smallest eigenvalue {ev[0]:.3e}, {int((ev < -JITTER).sum())} eigenvalues below -jitter"
        ) from None


def sample_phi_batch(K: int, n: int, delta: float, seed: int, size: int, g_scaled: bool = True) -> np.ndarray:
    """``size`` draws of ``Φ_K`` at the partition nodes, shape ``(size, K^2 n^2)``."""
    L = _factor(int(K), int(n), float(delta), bool(g_scaled))
    noise = generator(seed).standard_normal((size, L.shape[0]))
    return noise @ L.T


def sample_phi(K: int, n: int = 2, delta: float = 0.1, seed: int = 0, g_scaled: bool = True) -> ContinuumFieldSample:
    part = SquarePartition(K, n, delta)
    vals = sample_phi_batch(K, n, delta, seed, 1, g_scaled)[0]
    return ContinuumFieldSample(part, vals, seed, g_scaled)


def weight_f(s) -> np.ndarray | float:
    """``F(s) = s e^{-αs} 1{s >= 0}``."""
    s_arr = np.asarray(s, dtype=float)
    out = np.where(s_arr >= 0, s_arr * np.exp(-ALPHA * np.maximum(s_arr, 0.0)), 0.0)
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=16)
def _node_psi(n: int, delta: float) -> np.ndarray:
    return psi_density(SquarePartition(1, n, delta).relative_nodes)


def zk_measure(phi: ContinuumFieldSample, c_star: float = 1.0, m: int | None = None) -> CellMeasure:
    """``Z_K`` on the ``m x m`` grid (default ``m = K``).

    ``Z_K(A) = c⋆ Σ_i ∫ dz ψ(z) F(2√g log K - Φ_K(w_i + z/K)) 1_A(w_i + z/K)``,
    with the ``z``-integral over ``(δ, 1 - δ)^2`` replaced by the node rule.
    """
    part = phi.partition
    K = part.K
    m = K if m is None else int(m)
    if m < K:
        raise ValueError(f"grid of {m} cells per side is coarser than K={K}")
    w = c_star * part.node_weight * _node_psi(part.n, part.delta)
    vals = phi.by_subsquare()
    mass = w[None, :] * weight_f(TWO_SQRT_G * math.log(K) - vals) if K > 1 else w[None, :] * 0.0
    pts = part.nodes()
    cell = np.minimum((pts * m).astype(int), m - 1)
    cells = np.zeros((m, m))
    np.add.at(cells, (cell[:, 0], cell[:, 1]), mass.ravel())
    return CellMeasure(cells)


def zk_totals(K: int, n: int, delta: float, seed: int, size: int, c_star: float = 1.0) -> np.ndarray:
    """Total masses ``Z_K([0,1]^2)`` of ``size`` independent draws."""
    vals = sample_phi_batch(K, n, delta, seed, size)
    w = c_star * SquarePartition(K, n, delta).node_weight * np.tile(_node_psi(n, delta), K * K)
    return weight_f(TWO_SQRT_G * math.log(K) - vals) @ w


# ------------------------------------------------------------- auxiliary process


def default_b_k(K: int) -> float:
    return max(0.5, 0.3 * math.log(math.log(K + 16)))


@dataclass(frozen=True)
class AuxProcessConfig:
    K: int
    delta: float = 0.1
    b_K: float | None = None
    C_star: float = 1.0

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if not 0.0 <= self.delta < 0.5:
            raise ValueError("margin delta must lie in [0, 1/2)")
        if not self.b > 1.0 / ALPHA:
            raise ValueError(f"b_K must exceed 1/sqrt(2 pi) = {1 / ALPHA:.5f}, got {self.b}")
        p = self.p_flag
        if not 0.0 < p < 1.0:
            raise ValueError(f"P(flag = 1) = {p} is not a probability in (0, 1)")

    @property
    def b(self) -> float:
        return default_b_k(self.K) if self.b_K is None else float(self.b_K)

    @property
    def p_flag(self) -> float:
        return self.C_star * self.b * math.exp(-ALPHA * self.b)


def y_survival(x, b: float) -> np.ndarray:
    """``P(Y >= x) = ((b + x)/b) e^{-αx}`` for ``x >= 0``."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= 0, 1.0, (b + np.maximum(x, 0)) / b * np.exp(-ALPHA * np.maximum(x, 0)))


def sample_y(u, b: float, tol: float = 1e-10) -> np.ndarray:
    """Invert the survival function of ``Y`` at levels ``u`` by vectorized bisection."""
    u = np.asarray(u, dtype=float)
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    while np.any(y_survival(hi, b) > u):
        hi = np.where(y_survival(hi, b) > u, 2.0 * hi, hi)
    while np.max(hi - lo, initial=0.0) > tol:
        mid = 0.5 * (lo + hi)
        above = y_survival(mid, b) > u
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return 0.5 * (lo + hi)


def sample_aux_marginals(config: AuxProcessConfig, n: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``n`` i.i.d. triplets (flag, Y, z)."""
    rng = generator(seed)
    flag = rng.random(n) < config.p_flag
    y = sample_y(rng.random(n), config.b)
    z = sample_psi(n, substream(seed, 1))
    return flag, y, z


@dataclass
class AuxSample:
    values: np.ndarray
    maximum: float
    regional: dict[tuple, float] = field(default_factory=dict)


def sample_aux_process(
    config: AuxProcessConfig,
    phi: ContinuumFieldSample,
    seed: int,
    regions: Sequence[tuple[float, float, float, float]] = (),
) -> AuxSample:
    """Cell values ``G_i``, their maximum and maxima over sub-squares inside each region.

    ``G_i = Y_i + b_K - 2√g log K + Φ_K(w_i + z_i/K)`` when the flag is one and
    ``z_i`` falls in ``(δ, 1 - δ)^2``, else ``-2√g log K``.  ``Φ_K`` is read at
    the node of sub-square ``i`` nearest to ``z_i``.
    """
    K = config.K
    if phi.K != K:
        raise ValueError("field and configuration disagree on K")
    flag, y, z = sample_aux_marginals(config, K * K, seed)
    base = -TWO_SQRT_G * math.log(K)
    rel = phi.partition.relative_nodes
    nearest = np.argmin(((z[:, None, :] - rel[None, :, :]) ** 2).sum(-1), axis=1)
    phi_at = phi.by_subsquare()[np.arange(K * K), nearest]
    d = config.delta
    inside = (z > d).all(axis=1) & (z < 1 - d).all(axis=1)
    active = flag & inside
    values = np.where(active, y + config.b + base + phi_at, base)
    anchors = phi.partition.anchors
    regional = {}
    for reg in regions:
        a1, b1, a2, b2 = reg
        sel = (anchors[:, 0] >= a1 - 1e-12) & (anchors[:, 0] + 1.0 / K <= b1 + 1e-12)
        sel &= (anchors[:, 1] >= a2 - 1e-12) & (anchors[:, 1] + 1.0 / K <= b2 + 1e-12)
        regional[tuple(reg)] = float(values[sel].max()) if sel.any() else -math.inf
    return AuxSample(values, float(values.max()), regional)


# --------------------------------------------------------- comparison with lattice


def implied_max_cdf(z_totals, t) -> np.ndarray:
    """``E exp(-α^{-1} Z e^{-αt})`` averaged over the supplied ``Z`` samples."""
    z = np.asarray(z_totals, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return np.exp(-np.outer(np.exp(-ALPHA * t), z) / ALPHA).mean(axis=1)


def dmart_vs_lattice_report(
    z_totals,
    maxes: MaxSample | np.ndarray,
    ts: Sequence[float] = (-1.0, 0.0, 1.0, 2.0),
    tolerance: float = 0.15,
    calibrate: bool = True,
    severity: str = "soft",
    name: str = "dmart_vs_lattice",
) -> TestReport:
    """Sup distance between the law implied by ``Z`` samples and empirical maxima.

    With ``calibrate`` the constant ``c⋆`` is rescaled so that the two medians
    agree; rescaling ``Z`` by ``c`` shifts the implied law by ``log(c)/α``.
    """
    z = np.asarray(z_totals, dtype=float)
    m = maxes.max_centered if isinstance(maxes, MaxSample) else np.asarray(maxes, dtype=float)
    if z.size == 0 or m.size == 0:
        raise ValueError("both sample sets must be nonempty")
    z = z[z > 0]
    if z.size == 0:
        raise ValueError("all Z samples vanish")
    shift = 0.0
    if calibrate:
        lo, hi = -50.0, 50.0
        t_med = optimize.brentq(lambda t: implied_max_cdf(z, t)[0] - 0.5, lo, hi)
        shift = float(np.median(m) - t_med)
    ts = np.asarray(ts, dtype=float)
    model = implied_max_cdf(z, ts - shift)
    emp = np.array([(m <= t).mean() for t in ts])
    disc = np.abs(model - emp)
    sup = float(disc.max())
    se = float(np.max(np.sqrt(emp * (1 - emp) / m.size + model * (1 - model) / z.size)))
    return TestReport(
        name=name,
        estimate=sup,
        stderr=se,
        tolerance=tolerance,
        verdict=PASS if sup <= tolerance else FAIL,
        severity=severity,
        replicates=int(m.size),
        details={
            "t": ts.tolist(),
            "model_cdf": model.tolist(),
            "empirical_cdf": emp.tolist(),
            "shift": shift,
            "c_star_factor": math.exp(ALPHA * shift),
            "n_z": int(z.size),
        },
    )
