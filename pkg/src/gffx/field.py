"""Exact sampling of the discrete Gaussian free field on a square box.

Sites of ``V_N = (0, N)^2 ∩ Z^2`` are stored as an ``(N-1, N-1)`` array whose
entry ``[x1 - 1, x2 - 1]`` holds the height at ``(x1, x2)``; the Dirichlet
boundary is implicit (heights outside the box are zero).

The covariance is the Green function of simple random walk killed on exiting
the box, i.e. the inverse of ``I - P``.  In the orthonormal product-sine basis
``phi_jk(x) = (2/N) sin(pi j x1 / N) sin(pi k x2 / N)`` this operator is
diagonal with eigenvalues ``1 - (cos(pi j/N) + cos(pi k/N)) / 2``, so a sample
is one type-I discrete sine transform of scaled white noise.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constants import G
from .reports import FAIL, PASS, TestReport
from .rng import generator

__all__ = [
    "LatticeBox",
    "FieldSample",
    "GreenOperator",
    "SubBoxGrid",
    "CoarseFineSplit",
    "green_operator",
    "green_exact",
    "green_matrix",
    "precision_matrix",
    "sample_field",
    "sample_batch",
    "centering_mn",
    "centering_mn_real",
    "interpolate",
    "gibbs_markov_split",
    "harmonic_extension",
    "green_bound_check",
    "CHOLESKY_MAX_N",
    "dump_raw",
    "load_raw",
    "field_metadata",
]

CHOLESKY_MAX_N = 16
GENERATOR_TAGS = ("spectral", "cholesky", "interpolated", "coarse", "fine")


@dataclass(frozen=True)
class LatticeBox:
    N: int
    rho: float | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"box side N must be an integer >= 2, got {self.N}")
        if self.rho is not None and not 0.0 < self.rho < 1.0:
            raise ValueError(f"bulk margin rho must lie in (0, 1), got {self.rho}")

    @property
    def n(self) -> int:
        return self.N - 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.N - 1, self.N - 1)

    @property
    def n_sites(self) -> int:
        return (self.N - 1) ** 2

    def check_site(self, site) -> tuple[int, int]:
        x1, x2 = (int(site[0]), int(site[1]))
        if not (1 <= x1 <= self.N - 1 and 1 <= x2 <= self.N - 1):
            raise ValueError(f"site {tuple(site)} is not an interior site of V_{self.N}")
        return x1, x2

    def index(self, site) -> int:
        """Row-major flat index of an interior site."""
        x1, x2 = self.check_site(site)
        return (x1 - 1) * (self.N - 1) + (x2 - 1)

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.arange(1, self.N)
        return np.meshgrid(c, c, indexing="ij")

    def boundary_distance(self) -> np.ndarray:
        """Euclidean distance from each site to ``Z^2 \\ V_N``."""
        x1, x2 = self.coordinates()
        return np.minimum(np.minimum(x1, self.N - x1), np.minimum(x2, self.N - x2)).astype(float)

    def bulk_mask(self, rho: float | None = None) -> np.ndarray:
        """Indicator of ``V_{N,rho}``."""
        rho = self.rho if rho is None else rho
        if rho is None:
            raise ValueError("no bulk margin rho given")
        return self.boundary_distance() > rho * self.N


@dataclass
class FieldSample:
    box: LatticeBox
    values: np.ndarray
    seed: int
    generator: str
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.box.shape:
            raise ValueError(f"expected values of shape {self.box.shape}, got {self.values.shape}")
        if self.generator not in GENERATOR_TAGS:
            raise ValueError(f"unknown generator tag {self.generator!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def N(self) -> int:
        return self.box.N

    def at(self, site) -> float:
        x1, x2 = self.box.check_site(site)
        return float(self.values[x1 - 1, x2 - 1])


def _eigenvalues(N: int) -> np.ndarray:
    c = np.cos(np.pi * np.arange(1, N) / N)
    return 1.0 - 0.5 * (c[:, None] + c[None, :])


def _sine_basis(N: int) -> np.ndarray:
    """``S[j-1, x-1] = sqrt(2/N) sin(pi j x / N)``, orthogonal and symmetric."""
    j = np.arange(1, N)
    return math.sqrt(2.0 / N) * np.sin(np.pi * np.outer(j, j) / N)


class GreenOperator:
    """Exact Green function of the killed walk on ``V_N``.

    Immutable after construction; cached instances are shared via
    :func:`green_operator`.
    """

    g = G

    def __init__(self, box: LatticeBox, method: str = "spectral"):
        if method not in ("spectral", "direct-solve"):
            raise ValueError(f"unknown Green function method {method!r}")
        self.box = box
        self.method = method
        self.eigenvalues = _eigenvalues(box.N)
        self.eigenvalues.setflags(write=False)
        self._basis = _sine_basis(box.N)
        self._basis.setflags(write=False)
        self._lu = None

    @property
    def N(self) -> int:
        return self.box.N

    def __call__(self, x, y) -> float:
        x1, x2 = self.box.check_site(x)
        y1, y2 = self.box.check_site(y)
        if self.method == "direct-solve":
            col = self._direct_column(x1, x2)
            return float(col[y1 - 1, y2 - 1])
        S = self._basis
        a = S[:, x1 - 1] * S[:, y1 - 1]
        b = S[:, x2 - 1] * S[:, y2 - 1]
        return float(a @ (1.0 / self.eigenvalues) @ b)

    def column(self, x) -> np.ndarray:
        """``G(x, .)`` over the whole box, as an ``(N-1, N-1)`` array."""
        x1, x2 = self.box.check_site(x)
        if self.method == "direct-solve":
            return self._direct_column(x1, x2)
        e = np.zeros(self.box.shape)
        e[x1 - 1, x2 - 1] = 1.0
        return apply_green(e, self.eigenvalues)

    def diagonal(self, x) -> float:
        return self(x, x)

    def matrix(self) -> np.ndarray:
        """Dense ``(N-1)^2 x (N-1)^2`` covariance, row-major site order."""
        if self.method == "direct-solve":
            return green_matrix(self.box, "direct-solve")
        S = self._basis
        B = np.kron(S, S)
        return (B * (1.0 / self.eigenvalues).ravel()[None, :]) @ B.T

    def _direct_column(self, x1: int, x2: int) -> np.ndarray:
        if self._lu is None:
            self._lu = spla.splu(precision_matrix(self.box).tocsc())
        e = np.zeros(self.box.n_sites)
        e[(x1 - 1) * self.box.n + (x2 - 1)] = 1.0
        return self._lu.solve(e).reshape(self.box.shape)


def apply_green(rhs: np.ndarray, eigenvalues: np.ndarray) -> np.ndarray:
    """Solve ``(I - P) u = rhs`` on the trailing two axes."""
    axes = (-2, -1)
    return sfft.dstn(sfft.dstn(rhs, type=1, norm="ortho", axes=axes) / eigenvalues, type=1, norm="ortho", axes=axes)


@lru_cache(maxsize=32)
def green_operator(N: int, method: str = "spectral") -> GreenOperator:
    return GreenOperator(LatticeBox(N), method)


def green_exact(box: LatticeBox | int, x, y, method: str = "spectral") -> float:
    """``G_N(x, y)``: expected visits to ``y`` of the walk from ``x`` before exit."""
    N = box.N if isinstance(box, LatticeBox) else int(box)
    return green_operator(N, method)(x, y)


def precision_matrix(box: LatticeBox) -> sp.csr_matrix:
    """Sparse ``I - P`` with killing at the boundary (one quarter of the Dirichlet Laplacian)."""
    n = box.n
    one = sp.identity(n, format="csr")
    path = sp.diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="csr")
    adjacency = sp.kron(path, one) + sp.kron(one, path)
    return (sp.identity(n * n, format="csr") - 0.25 * adjacency).tocsr()


def green_matrix(box: LatticeBox | int, method: str = "spectral") -> np.ndarray:
    box = box if isinstance(box, LatticeBox) else LatticeBox(int(box))
    if method == "spectral":
        return green_operator(box.N).matrix()
    if method == "direct-solve":
        A = precision_matrix(box).toarray()
        return np.linalg.solve(A, np.eye(box.n_sites))
    raise ValueError(f"unknown Green function method {method!r}")


@lru_cache(maxsize=8)
def _cholesky_factor(N: int) -> np.ndarray:
    return np.linalg.cholesky(green_matrix(LatticeBox(N), "direct-solve"))


def sample_batch(box: LatticeBox | int, seed: int, size: int, method: str = "spectral") -> np.ndarray:
    """``size`` independent fields from one generator, shape ``(size, N-1, N-1)``."""
    box = box if isinstance(box, LatticeBox) else LatticeBox(int(box))
    rng = generator(seed)
    if method == "spectral":
        noise = rng.standard_normal((size,) + box.shape)
        noise /= np.sqrt(_eigenvalues(box.N))
        return sfft.dstn(noise, type=1, norm="ortho", axes=(-2, -1))
    if method == "cholesky":
        if box.N > CHOLESKY_MAX_N:
            raise ValueError(f"Cholesky sampler is limited to N <= {CHOLESKY_MAX_N}")
        L = _cholesky_factor(box.N)
        noise = rng.standard_normal((size, box.n_sites))
        return (noise @ L.T).reshape((size,) + box.shape)
    raise ValueError(f"unknown sampling method {method!r}")


def sample_field(box: LatticeBox | int, seed: int, method: str = "spectral") -> FieldSample:
    box = box if isinstance(box, LatticeBox) else LatticeBox(int(box))
    values = sample_batch(box, seed, 1, method)[0]
    return FieldSample(box, values, int(seed), method)


def centering_mn_real(N: float) -> float:
    """``2 sqrt(g) log N - (3/4) sqrt(g) log log N`` for any real ``N > 1``."""
    if not N > 1.0:
        raise ValueError(f"centering needs N > 1, got {N}")
    sg = math.sqrt(G)
    L = math.log(N)
    return 2.0 * sg * L - 0.75 * sg * math.log(L)


def centering_mn(N: int) -> float:
    if int(N) != N or N < 3:
        raise ValueError(f"centering m_N is defined here for integers N >= 3, got {N}")
    return centering_mn_real(float(N))


def interpolate(hA: FieldSample, hB: FieldSample, t: float) -> FieldSample:
    """``sqrt(1 - s) hA + sqrt(s) hB`` with ``s = t / (g log N)``.

    The caller is responsible for ``hA`` and ``hB`` being independent.
    """
    if hA.box != hB.box:
        raise ValueError("interpolated fields must live on the same box")
    if t < 0:
        raise ValueError("interpolation time must be nonnegative")
    N = hA.box.N
    scale = G * math.log(N)
    if t > scale:
        raise ValueError(f"interpolation time {t} exceeds g log N = {scale}")
    s = t / scale
    values = math.sqrt(1.0 - s) * hA.values + math.sqrt(s) * hB.values
    meta = {"t": t, "s": s, "parents": [hA.seed, hB.seed]}
    return FieldSample(hA.box, values, hA.seed, "interpolated", meta)


# ---------------------------------------------------------------- Gibbs-Markov


@dataclass(frozen=True)
class SubBoxGrid:
    N: int
    K: int
    delta: float = 0.1

    def __post_init__(self):
        if self.K < 1 or self.N % self.K:
            raise ValueError(f"N={self.N} not divisible by K={self.K}")
        if not 0.0 <= self.delta < 0.5:
            raise ValueError("margin delta must lie in [0, 1/2)")

    @property
    def L(self) -> int:
        return self.N // self.K

    def on_lines(self) -> np.ndarray:
        """Sites lying on a sub-box boundary."""
        c = np.arange(1, self.N) % self.L == 0
        return c[:, None] | c[None, :]

    def box_index(self) -> np.ndarray:
        """Sub-box index ``i`` (row-major over the ``K x K`` tiling), -1 on the lines."""
        c = np.arange(1, self.N)
        blk = c // self.L
        idx = blk[:, None] * self.K + blk[None, :]
        return np.where(self.on_lines(), -1, idx)

    def inner_mask(self) -> np.ndarray:
        """Union of the shrunken boxes ``V_N^{K, delta, i}``."""
        c = np.arange(1, self.N)
        r = c - (c // self.L) * self.L
        lo, hi = self.delta * self.L, (1.0 - self.delta) * self.L
        inside = (r > lo) & (r < hi)
        return inside[:, None] & inside[None, :]

    def sub_box_sites(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Lattice coordinates of ``V_N^{K,i}`` (translate of ``V_{N/K}``)."""
        a, b = divmod(int(i), self.K)
        c = np.arange(1, self.L)
        return np.meshgrid(a * self.L + c, b * self.L + c, indexing="ij")


@dataclass
class CoarseFineSplit:
    coarse: FieldSample
    fine: FieldSample
    grid: SubBoxGrid


def harmonic_extension(values: np.ndarray, K: int) -> np.ndarray:
    """Coarse field of ``values`` (shape ``(..., N-1, N-1)``) for a ``K x K`` tiling.

    Equal to ``values`` on the sub-box boundaries and discrete harmonic inside
    every sub-box; each sub-box problem is solved exactly with a sine transform.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    N = n + 1
    if N % K:
        raise ValueError(f"N={N} not divisible by K={K}")
    L = N // K
    out = values.copy()
    if L == 1:
        return out
    lead = values.shape[:-2]
    full = np.zeros(lead + (N + 1, N + 1))
    full[..., 1:N, 1:N] = values
    # interior blocks of every sub-box, shape (..., K, K, L-1, L-1)
    blocks = np.zeros(lead + (K, K, L - 1, L - 1))
    for a in range(K):
        r0 = a * L
        for b in range(K):
            c0 = b * L
            rhs = np.zeros(lead + (L - 1, L - 1))
            rhs[..., 0, :] += full[..., r0, c0 + 1 : c0 + L]
            rhs[..., -1, :] += full[..., r0 + L, c0 + 1 : c0 + L]
            rhs[..., :, 0] += full[..., r0 + 1 : r0 + L, c0]
            rhs[..., :, -1] += full[..., r0 + 1 : r0 + L, c0 + L]
            blocks[..., a, b, :, :] = rhs
    lam = 4.0 * _eigenvalues(L)
    sol = sfft.dstn(sfft.dstn(blocks, type=1, norm="ortho", axes=(-2, -1)) / lam, type=1, norm="ortho", axes=(-2, -1))
    for a in range(K):
        for b in range(K):
            out[..., a * L : a * L + L - 1, b * L : b * L + L - 1] = sol[..., a, b, :, :]
    return out


def gibbs_markov_split(h: FieldSample, K: int, delta: float = 0.1) -> CoarseFineSplit:
    grid = SubBoxGrid(h.box.N, int(K), delta)
    coarse = harmonic_extension(h.values, grid.K)
    fine = h.values - coarse
    fine[grid.on_lines()] = 0.0
    meta = {"K": grid.K, "parent": h.seed}
    return CoarseFineSplit(
        FieldSample(h.box, coarse, h.seed, "coarse", dict(meta)),
        FieldSample(h.box, fine, h.seed, "fine", dict(meta)),
        grid,
    )


# ------------------------------------------------------------ Green bounds


def _relative_sources(N: int, fractions: Iterable[float]) -> list[tuple[int, int]]:
    fr = list(fractions)
    return [(max(1, min(N - 1, round(a * N))), max(1, min(N - 1, round(b * N)))) for a in fr for b in fr]


def green_bound_check(
    box: LatticeBox | int,
    rho: float,
    fractions: Iterable[float] = (0.3, 0.4, 0.5, 0.6, 0.7),
    upper_ceiling: float = 2.0,
    bulk_ceiling: float = 2.0,
) -> TestReport:
    """Smallest constants in ``G_N(x,y) <= g (log N - log(|y-x| v 1)) + C``.

    Sources ``x`` sit at the given relative positions; ``y`` ranges over the
    whole box.  The two-sided constant is restricted to ``x, y`` in
    ``V_{N,rho}``.  Reports the upper constant as the estimate.
    """
    box = box if isinstance(box, LatticeBox) else LatticeBox(int(box))
    if not 0.0 < rho < 0.5:
        raise ValueError("rho must lie in (0, 1/2)")
    N = box.N
    op = green_operator(N)
    x1, x2 = box.coordinates()
    bulk = box.bulk_mask(rho)
    logN = math.log(N)
    upper = -np.inf
    lower = -np.inf
    bulk_abs = 0.0
    diag = []
    for src in _relative_sources(N, fractions):
        col = op.column(src)
        dist = np.hypot(x1 - src[0], x2 - src[1])
        ref = G * (logN - np.log(np.maximum(dist, 1.0)))
        diff = col - ref
        upper = max(upper, float(diff.max()))
        diag.append(float(col[src[0] - 1, src[1] - 1] - G * logN))
        if bulk[src[0] - 1, src[1] - 1]:
            d = diff[bulk]
            lower = max(lower, float((-d).max()))
            bulk_abs = max(bulk_abs, float(np.abs(d).max()))
    ok = upper <= upper_ceiling and bulk_abs <= bulk_ceiling
    return TestReport(
        name=f"green_bound_N{N}",
        estimate=upper,
        stderr=0.0,
        tolerance=upper_ceiling,
        verdict=PASS if ok else FAIL,
        details={
            "N": N,
            "rho": rho,
            "upper_constant": upper,
            "lower_constant_bulk": lower,
            "two_sided_constant_bulk": bulk_abs,
            "diagonal_minus_glogN": diag,
            "bulk_ceiling": bulk_ceiling,
        },
    )


# ------------------------------------------------------------------ raw dumps

RAW_MAGIC = b"DGFF"
RAW_VERSION = 1
_HEADER = struct.Struct("<4sIIIQQ")  # magic, version, N, reserved, seed, value count


def dump_raw(sample: FieldSample, path) -> dict[str, Any]:
    """Write the 32-byte header and the heights as little-endian float64, row-major.

    Returns the metadata record (also written next to the dump as ``.json``).
    """
    values = np.ascontiguousarray(sample.values, dtype="<f8")
    header = _HEADER.pack(RAW_MAGIC, RAW_VERSION, sample.box.N, 0, int(sample.seed) & (2**64 - 1), values.size)
    payload = header + values.tobytes()
    Path(path).write_bytes(payload)
    meta = field_metadata(sample, payload)
    Path(str(path) + ".json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return meta


def field_metadata(sample: FieldSample, payload: bytes | None = None) -> dict[str, Any]:
    if payload is None:
        values = np.ascontiguousarray(sample.values, dtype="<f8")
        payload = _HEADER.pack(RAW_MAGIC, RAW_VERSION, sample.box.N, 0, int(sample.seed) & (2**64 - 1), values.size)
        payload += values.tobytes()
    return {
        "N": sample.box.N,
        "seed": int(sample.seed),
        "generator": sample.generator,
        "checksum": "sha256:" + hashlib.sha256(payload).hexdigest(),
    }


def load_raw(path, generator_tag: str = "spectral") -> FieldSample:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("file too short for a field header")
    magic, version, N, _, seed, count = _HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise ValueError("not a field dump (bad magic)")
    if version != RAW_VERSION:
        raise ValueError(f"unsupported dump version {version}")
    if count != (N - 1) ** 2 or len(data) != _HEADER.size + 8 * count:
        raise ValueError("dump size does not match its header")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(N - 1, N - 1).astype(float)
    return FieldSample(LatticeBox(N), values, seed, generator_tag)
