"""Level sets, r-local maxima and the extremal point measures of a sampled field."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import _localmax
from .constants import G, TWO_SQRT_G
from .field import FieldSample, LatticeBox, centering_mn, interpolate
from .measures import MaxSample, PointMeasure
from .reports import FAIL, PASS, TestReport, bootstrap_mean_stderr

__all__ = [
    "LevelSetReport",
    "default_radius",
    "local_maxima",
    "level_set",
    "extract_eta",
    "top_l_sum",
    "level_set_diagnostics",
    "daviaud_exponent",
    "daviaud_from_counts",
    "daviaud_d",
    "oscillation",
    "interpolation_oscillation",
    "max_sample",
    "DEFAULT_LAMBDA",
]

DEFAULT_LAMBDA = 6.0


def _values(h) -> tuple[np.ndarray, int]:
    if isinstance(h, FieldSample):
        return h.values, h.box.N
    v = np.asarray(h, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("expected a square array of heights")
    return v, v.shape[0] + 1


def default_radius(N: int) -> int:
    """``r_N = ceil(sqrt(N))``."""
    return math.isqrt(N - 1) + 1 if N > 1 else 1


def _sites(mask: np.ndarray) -> np.ndarray:
    return np.argwhere(mask) + 1


def local_maxima(h, r: int) -> np.ndarray:
    """Lattice sites (1-based, lexicographic order) that win their ``Λ_r`` ball."""
    v, _ = _values(h)
    return _sites(_localmax.local_maxima_mask(v, r))


def level_set(h, lam: float) -> np.ndarray:
    """Sites of ``Γ_N(λ) = {x : h_x >= m_N - λ}``."""
    v, N = _values(h)
    return _sites(v >= centering_mn(N) - lam)


def extract_eta(h, r: int | None = None, lam: float = DEFAULT_LAMBDA, **meta) -> PointMeasure:
    """Points ``(x/N, h_x - m_N)`` over r-local maxima in ``Γ_N(λ)``."""
    v, N = _values(h)
    r = default_radius(N) if r is None else r
    mN = centering_mn(N)
    mask = _localmax.local_maxima_mask(v, r, mN - lam)
    sites = _sites(mask)
    if isinstance(h, FieldSample):
        meta.setdefault("seed", h.seed)
    meta.update({"N": N, "r": int(r), "lam": float(lam)})
    return PointMeasure(sites / N, v[mask] - mN, meta)


def top_l_sum(h, ell: int) -> tuple[float, np.ndarray]:
    """``S_{ℓ,N}``: largest sum of ``ℓ`` heights, with the achieving sites."""
    v, _ = _values(h)
    flat = v.ravel()
    if int(ell) != ell or not 1 <= ell <= flat.size:
        raise ValueError(f"ell must be an integer in [1, {flat.size}], got {ell}")
    order = np.argsort(-flat, kind="stable")[: int(ell)]
    sites = np.column_stack(np.unravel_index(order, v.shape)) + 1
    return float(flat[order].sum()), sites


def max_sample(fields: Iterable, N: int | None = None) -> MaxSample:
    """Centered maxima and scaled argmax positions of a stream of fields."""
    maxima, pos = [], []
    for h in fields:
        v, n = _values(h)
        if N is not None and n != N:
            raise ValueError("fields of different sizes")
        N = n
        k = int(np.argmax(v))
        a, b = divmod(k, v.shape[1])
        maxima.append(v[a, b] - centering_mn(n))
        pos.append(((a + 1) / n, (b + 1) / n))
    return MaxSample(np.array(maxima), np.array(pos).reshape(-1, 2), N or 0)


def oscillation(h, region) -> float:
    """``max - min`` of the field over ``region`` (boolean mask or ``(k, 2)`` site array)."""
    v, _ = _values(h)
    region = np.asarray(region)
    if region.dtype == bool:
        vals = v[region]
    else:
        region = region.reshape(-1, 2)
        vals = v[region[:, 0] - 1, region[:, 1] - 1]
    if vals.size == 0:
        raise ValueError("oscillation over an empty region")
    return float(vals.max() - vals.min())


def _l1_ball(site, radius: int, N: int) -> np.ndarray:
    x1, x2 = site
    d = np.arange(-radius, radius + 1)
    d1, d2 = np.meshgrid(d, d, indexing="ij")
    keep = np.abs(d1) + np.abs(d2) <= radius
    pts = np.column_stack([x1 + d1[keep], x2 + d2[keep]])
    inside = (pts >= 1).all(axis=1) & (pts <= N - 1).all(axis=1)
    return pts[inside]


def interpolation_oscillation(hA: FieldSample, hB: FieldSample, t: float, r: int, lam: float) -> float:
    """Median over peaks of the oscillation of the ``sqrt(s) hB`` part on ``Λ_{2r}``.

    Peaks are the r-local maxima of the interpolated field lying in ``Γ_N(λ)``.
    Returns ``nan`` when there is no such peak.
    """
    h = interpolate(hA, hB, t)
    s = h.meta["s"]
    part = math.sqrt(s) * hB.values
    peaks = local_maxima(h, r)
    peaks = peaks[h.values[peaks[:, 0] - 1, peaks[:, 1] - 1] >= centering_mn(h.N) - lam]
    if len(peaks) == 0:
        return float("nan")
    return float(np.median([oscillation(part, _l1_ball(p, 2 * r, h.N)) for p in peaks]))


# ------------------------------------------------------------- diagnostics


@dataclass
class LevelSetReport:
    lam: float
    sizes: np.ndarray
    separation_histogram: dict[str, int]
    bulk_exclusion: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.bulk_exclusion > self.sizes) or np.any(self.bulk_exclusion < 0):
            raise ValueError("bulk-exclusion counts must lie in [0, size]")


def level_set_diagnostics(
    samples: Iterable,
    lam: float,
    rho: float,
    r: int,
    c: float = 0.1,
    C: float = 3.0,
    min_containment: float = 0.9,
    max_exclusion: float = 0.1,
) -> tuple[LevelSetReport, TestReport]:
    """Size bounds, intermediate-distance pairs and bulk confinement of ``Γ_N(λ)``.

    For each sample the level set is examined for: ``e^{cλ} <= |Γ| <= e^{Cλ}``;
    a pair at distance in ``[r, N/r]``; a site outside ``V_{N,ρ}``.  The
    returned test report carries the three frequencies; its estimate is the
    containment frequency.
    """
    sizes, excluded, far_pair = [], [], []
    bands = {"below_r": 0, "r_to_N_over_r": 0, "above_N_over_r": 0}
    N = None
    for h in samples:
        v, n = _values(h)
        if N is None:
            N = n
            bulk = LatticeBox(N).bulk_mask(rho)
            hi = N / r
        pts_mask = v >= centering_mn(N) - lam
        pts = np.argwhere(pts_mask).astype(float)
        sizes.append(len(pts))
        excluded.append(int((pts_mask & ~bulk).sum()))
        if len(pts) >= 2:
            tree = cKDTree(pts)
            below, upto = tree.count_neighbors(tree, [r - 1e-9, hi])
            n_pairs = len(pts) * (len(pts) - 1) // 2
            below = (below - len(pts)) // 2
            upto = (upto - len(pts)) // 2
            bands["below_r"] += int(below)
            bands["r_to_N_over_r"] += int(upto - below)
            bands["above_N_over_r"] += int(n_pairs - upto)
            far_pair.append(upto > below)
        else:
            far_pair.append(False)
    if len(sizes) < 100:
        raise ValueError(f"need at least 100 samples, got {len(sizes)}")
    sizes = np.array(sizes)
    excluded = np.array(excluded)
    contained = (sizes >= math.exp(c * lam)) & (sizes <= math.exp(C * lam))
    freq_contained = float(contained.mean())
    freq_pair = float(np.mean(far_pair))
    freq_excluded = float((excluded > 0).mean())
    rep = LevelSetReport(lam, sizes, bands, excluded, {"N": N, "rho": rho, "r": r})
    ok = freq_contained >= min_containment and freq_excluded <= max_exclusion
    n = len(sizes)
    test = TestReport(
        name=f"level_set_N{N}_lam{lam:g}",
        estimate=freq_contained,
        stderr=math.sqrt(max(freq_contained * (1 - freq_contained), 1e-12) / n),
        tolerance=min_containment,
        verdict=PASS if ok else FAIL,
        severity="soft",
        replicates=n,
        details={
            "containment_frequency": freq_contained,
            "intermediate_pair_frequency": freq_pair,
            "bulk_exclusion_frequency": freq_excluded,
            "c": c,
            "C": C,
            "mean_size": float(sizes.mean()),
            "separation_histogram": bands,
        },
    )
    return rep, test


def daviaud_d(s: float) -> float:
    """Exponent ``d(s) = 2 - s^2 / (2g)`` of ``|{x : h_x >= s log N}|``."""
    return 2.0 - s * s / (2.0 * G)


def daviaud_from_counts(counts: Sequence[int], N: int, s: float, tolerance: float = 0.25) -> TestReport:
    """Mean of ``log(count v 1) / log N`` compared with ``d(s)``."""
    if not 0.0 < s < TWO_SQRT_G:
        raise ValueError(f"s must lie in (0, 2 sqrt g) = (0, {TWO_SQRT_G:.5f}), got {s}")
    counts = np.asarray(counts, dtype=float)
    if counts.size == 0:
        raise ValueError("no samples")
    vals = np.log(np.maximum(counts, 1.0)) / math.log(N)
    est = float(vals.mean())
    se = bootstrap_mean_stderr(vals, seed=0) if vals.size > 1 else 0.0
    target = daviaud_d(s)
    return TestReport(
        name=f"daviaud_N{N}_s{s:g}",
        estimate=est,
        stderr=se,
        tolerance=tolerance,
        verdict=PASS if abs(est - target) <= tolerance else FAIL,
        severity="soft",
        replicates=int(counts.size),
        details={"s": s, "d_s": target, "N": N, "zero_count_samples": int((counts == 0).sum())},
    )


def daviaud_exponent(samples: Iterable, s: float, tolerance: float = 0.25) -> TestReport:
    if not 0.0 < s < TWO_SQRT_G:
        raise ValueError(f"s must lie in (0, 2 sqrt g) = (0, {TWO_SQRT_G:.5f}), got {s}")
    counts, N = [], None
    for h in samples:
        v, N = _values(h)
        counts.append(int((v >= s * math.log(N)).sum()))
    return daviaud_from_counts(counts, N, s, tolerance)

