"""Estimators and tests for the limit laws of the extremal process.

The reference limit object is the Poisson process with intensity
``Z(dx) ⊗ e^{-αh} dh``.  Its Laplace functional is invariant under
Dysonization: moving every height by an independent ``N(-αt/2, t)``
increment.  At the level of test functions this is the transform

    f_t(x, h) = -log E exp(-f(x, h + X)),    X ~ N(-αt/2, t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import integrate, special

from .constants import ALPHA
from .measures import CellMeasure, MaxSample, PointMeasure
from .reports import FAIL, PASS, TestReport, bootstrap_mean_stderr, judge
from .rng import generator, substream

__all__ = [
    "TestFunction",
    "GumbelProcessSample",
    "laplace_values",
    "laplace_functional",
    "f_t_transform",
    "f_t_indicator_closed_form",
    "dyson_shift",
    "dyson_shift_batch",
    "below_floor_compensator",
    "invariance_test",
    "sample_gumbel_ppp",
    "sample_gumbel_ppp_batch",
    "sample_max_from_z",
    "z_from_spacings",
    "z_samples_from_measures",
    "max_tail_fit",
    "lower_tail_check",
    "laplace_small_lambda",
    "argmax_joint_law",
    "region_weights",
    "hill_estimator",
    "z_moment_diagnostics",
]

FULL_SQUARE = (0.0, 1.0, 0.0, 1.0)
_TINY = 1e-15
_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


# ------------------------------------------------------------ test functions


@dataclass(frozen=True)
class TestFunction:
    """Nonnegative ``f(x, h) = 1_A(x) φ(h)``.

    ``kind`` selects the height profile ``φ``:

    ``indicator-product``
        ``β 1{a <= h < b}`` (``b = None`` means no upper end).
    ``smooth-bump``
        ``β exp(1 - 1/(1 - u^2))`` for ``u = (2h - a - b)/(b - a)`` in ``(-1, 1)``.
    ``tabulated``
        linear interpolation of ``table`` on ``grid``, constant beyond the ends.
    """

    __test__ = False

    kind: str
    region: tuple[float, float, float, float] = FULL_SQUARE
    a: float = 0.0
    b: float | None = None
    beta: float = 1.0
    grid: np.ndarray | None = field(default=None, compare=False)
    table: np.ndarray | None = field(default=None, compare=False)
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ("indicator-product", "smooth-bump", "tabulated"):
            raise ValueError(f"unknown test-function kind {self.kind!r}")
        if self.beta < 0 or not math.isfinite(self.beta):
            raise ValueError("amplitude must be finite and nonnegative")
        if self.kind == "smooth-bump" and (self.b is None or not self.b > self.a):
            raise ValueError("a smooth bump needs a finite window a < b")
        if self.b is not None and self.b <= self.a:
            raise ValueError("empty height window")
        if self.kind == "tabulated":
            if self.grid is None or self.table is None or len(self.grid) != len(self.table) or len(self.grid) < 2:
                raise ValueError("tabulated test function needs grid and table of equal length >= 2")
            if np.any(np.asarray(self.table) < 0):
                raise ValueError("test functions are nonnegative")

    @classmethod
    def indicator(cls, a: float, b: float | None = None, beta: float = 1.0, region=FULL_SQUARE) -> "TestFunction":
        return cls("indicator-product", tuple(region), a, b, beta)

    @classmethod
    def bump(cls, a: float, b: float, beta: float = 1.0, region=FULL_SQUARE) -> "TestFunction":
        return cls("smooth-bump", tuple(region), a, b, beta)

    @classmethod
    def zero(cls) -> "TestFunction":
        return cls("indicator-product", FULL_SQUARE, 0.0, None, 0.0)

    @property
    def is_zero(self) -> bool:
        if self.kind == "tabulated":
            return not np.any(self.table > 0)
        return self.beta == 0.0

    def profile(self, h) -> np.ndarray:
        """Height profile ``φ(h)``."""
        h = np.asarray(h, dtype=float)
        if self.kind == "indicator-product":
            inside = h >= self.a
            if self.b is not None:
                inside &= h < self.b
            return self.beta * inside
        if self.kind == "smooth-bump":
            u = (2.0 * h - self.a - self.b) / (self.b - self.a)
            out = np.zeros_like(u)
            m = np.abs(u) < 1.0
            out[m] = self.beta * np.exp(1.0 - 1.0 / (1.0 - u[m] ** 2))
            return out
        return np.interp(h, self.grid, self.table)

    def spatial(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, 2)
        a1, b1, a2, b2 = self.region
        return (x[:, 0] >= a1) & (x[:, 0] <= b1) & (x[:, 1] >= a2) & (x[:, 1] <= b2)

    def __call__(self, x, h) -> np.ndarray:
        return self.spatial(x) * self.profile(h)

    @property
    def sup(self) -> float:
        return float(np.max(self.table)) if self.kind == "tabulated" else self.beta

    def support_lower(self) -> float:
        """Lowest height at which the profile exceeds ``1e-15``."""
        if self.kind != "tabulated":
            return -math.inf if self.beta == 0 else self.a
        pos = np.nonzero(self.table > _TINY)[0]
        if len(pos) == 0:
            return math.inf
        return -math.inf if pos[0] == 0 else float(self.grid[pos[0] - 1])

    def support_upper(self) -> float:
        if self.kind != "tabulated":
            return math.inf if self.b is None else self.b
        pos = np.nonzero(self.table > _TINY)[0]
        if len(pos) == 0 or pos[-1] == len(self.table) - 1:
            return math.inf
        return float(self.grid[pos[-1] + 1])

    def breakpoints(self) -> list[float]:
        """Heights where the profile is not smooth."""
        if self.kind == "tabulated":
            return []
        return [self.a] if self.b is None else [self.a, self.b]


def _gauss_legendre(q: int) -> tuple[np.ndarray, np.ndarray]:
    if q not in _GL_CACHE:
        _GL_CACHE[q] = np.polynomial.legendre.leggauss(q)
    return _GL_CACHE[q]


def f_t_indicator_closed_form(f: TestFunction, t: float, h) -> np.ndarray:
    """Exact ``f_t`` profile for an indicator test function."""
    if f.kind != "indicator-product":
        raise ValueError("closed form exists only for indicator test functions")
    h = np.asarray(h, dtype=float)
    sd = math.sqrt(t)
    mu = h - ALPHA * t / 2.0
    p = special.ndtr((mu - f.a) / sd)  # P(h + X >= a)
    if f.b is not None:
        p = p - special.ndtr((mu - f.b) / sd)
    return -np.log1p(-(-math.expm1(-f.beta)) * p)


def _dispersed_loss(f: TestFunction, t: float, h: np.ndarray, q: int, method: str, width: float) -> np.ndarray:
    """``E[1 - exp(-φ(h + X))]`` by quadrature."""
    sd = math.sqrt(t)
    mean = -ALPHA * t / 2.0
    if method == "hermite":
        x, w = np.polynomial.hermite.hermgauss(q)
        y = h[:, None] + mean + math.sqrt(2.0 * t) * x[None, :]
        return (-np.expm1(-f.profile(y))) @ w / math.sqrt(math.pi)
    # split: Gauss-Legendre panels of width <= ``width`` sd between the breakpoints
    lo_s, hi_s = f.support_lower(), f.support_upper()
    nodes, weights = _gauss_legendre(q)
    out = np.zeros(len(h))
    for start in range(0, len(h), 2048):
        hh = h[start : start + 2048]
        centre = hh + mean
        lo = np.maximum(centre - 12.0 * sd, lo_s)
        hi = np.minimum(centre + 12.0 * sd, hi_s)
        cuts = [lo] + [np.clip(np.full_like(lo, c), lo, np.maximum(lo, hi)) for c in f.breakpoints()]
        cuts.append(np.maximum(lo, hi))
        cuts = np.sort(np.stack(cuts, axis=1), axis=1)
        acc = np.zeros(len(hh))
        for k in range(cuts.shape[1] - 1):
            left, right = cuts[:, k], cuts[:, k + 1]
            n_pan = max(1, int(math.ceil(float(np.max(right - left)) / (width * sd))))
            edges = left[:, None] + (right - left)[:, None] * np.linspace(0.0, 1.0, n_pan + 1)[None, :]
            a_, b_ = edges[:, :-1], edges[:, 1:]
            half = 0.5 * (b_ - a_)
            y = 0.5 * (a_ + b_)[..., None] + half[..., None] * nodes
            dens = np.exp(-0.5 * ((y - centre[:, None, None]) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))
            vals = -np.expm1(-f.profile(y)) * dens
            acc += np.einsum("ipq,q,ip->i", vals, weights, half)
        out[start : start + 2048] = acc
    return out


def f_t_transform(
    f: TestFunction,
    t: float,
    Q: int = 64,
    method: str = "auto",
    spacing: float = 1e-3,
    max_points: int = 40001,
    grid: np.ndarray | None = None,
) -> TestFunction:
    """Tabulate ``f_t`` on a height grid; the spatial factor passes through.

    ``method`` is ``hermite`` (order-``Q`` Gauss–Hermite), ``split``
    (Gauss–Legendre panels with ``Q`` nodes, split at the jumps of ``f``),
    ``closed-form`` (indicators only) or ``auto``: closed form for
    indicators, split otherwise.  Hermite nodes alias badly on jumps and on
    profiles narrow compared with ``sqrt(t)``, hence not the default.
    """
    if not t > 0:
        raise ValueError(f"Dysonization time must be positive, got {t}")
    if method == "auto":
        method = "closed-form" if f.kind == "indicator-product" else "split"
    if method not in ("hermite", "split", "closed-form"):
        raise ValueError(f"unknown quadrature method {method!r}")
    if grid is None:
        lo_s = f.support_lower()
        hi_s = f.support_upper()
        if not math.isfinite(lo_s):
            raise ValueError("f_t tabulation needs f to vanish below some height")
        top = hi_s if math.isfinite(hi_s) else lo_s
        if f.kind == "tabulated" and not math.isfinite(hi_s):
            top = float(f.grid[-1])
        shift = ALPHA * t / 2.0
        lo = lo_s + shift - 12.0 * math.sqrt(t)
        hi = top + shift + 12.0 * math.sqrt(t)
        n = min(int(math.ceil((hi - lo) / spacing)) + 1, max_points)
        grid = np.linspace(lo, hi, n)
    grid = np.asarray(grid, dtype=float)
    if f.is_zero:
        table = np.zeros_like(grid)
    elif method == "closed-form":
        table = f_t_indicator_closed_form(f, t, grid)
    else:
        loss = _dispersed_loss(f, t, grid, Q, method, width=3.0)
        table = -np.log1p(-np.clip(loss, 0.0, 1.0 - 1e-300))
    table = np.clip(table, 0.0, f.sup)
    meta = {"t": t, "method": method, "Q": Q, "source": f.kind}
    return TestFunction("tabulated", f.region, grid=grid, table=table, meta=meta)


# ------------------------------------------------------- Laplace functionals


def _concat(measures: Sequence[PointMeasure]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    counts = np.array([len(m) for m in measures], dtype=np.int64)
    x = np.concatenate([m.x for m in measures]) if counts.sum() else np.zeros((0, 2))
    h = np.concatenate([m.h for m in measures]) if counts.sum() else np.zeros(0)
    owner = np.repeat(np.arange(len(measures)), counts)
    return x, h, owner


def laplace_values(measures: Sequence[PointMeasure], f: TestFunction) -> np.ndarray:
    """``exp(-<η, f>)`` for every measure."""
    x, h, owner = _concat(measures)
    total = np.bincount(owner, weights=f(x, h), minlength=len(measures)) if len(h) else np.zeros(len(measures))
    return np.exp(-total)


def laplace_functional(measures: Sequence[PointMeasure], f: TestFunction, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo mean of ``exp(-<η, f>)`` and its bootstrap standard error."""
    if len(measures) < 100:
        raise ValueError(f"need at least 100 measures, got {len(measures)}")
    vals = laplace_values(measures, f)
    return float(vals.mean()), bootstrap_mean_stderr(vals, seed=seed)


def dyson_shift(measure: PointMeasure, t: float, seed: int) -> PointMeasure:
    """Shift every height by an independent ``N(-αt/2, t)`` draw."""
    return dyson_shift_batch([measure], t, seed)[0]


def dyson_shift_batch(measures: Sequence[PointMeasure], t: float, seed: int) -> list[PointMeasure]:
    if t < 0:
        raise ValueError("Dysonization time must be nonnegative")
    rng = generator(seed)
    out = []
    for m in measures:
        meta = dict(m.meta)
        meta.pop("lam", None)
        meta["dyson_t"] = meta.get("dyson_t", 0.0) + t
        if t == 0:
            out.append(PointMeasure(m.x.copy(), m.h.copy(), meta))
            continue
        step = rng.normal(-ALPHA * t / 2.0, math.sqrt(t), size=len(m))
        out.append(PointMeasure(m.x.copy(), m.h + step, meta))
    return out


# --------------------------------------------------------------- the PPP oracle


@dataclass
class GumbelProcessSample:
    """Points of ``PPP(Z(dx) ⊗ e^{-αh} dh)`` restricted to ``h >= h_min``."""

    x: np.ndarray
    h: np.ndarray
    Z: CellMeasure
    h_min: float
    seed: int = 0

    def __post_init__(self):
        if len(self.h) and self.h.min() < self.h_min:
            raise ValueError("point below the floor")

    def __len__(self) -> int:
        return len(self.h)

    def to_point_measure(self) -> PointMeasure:
        return PointMeasure(self.x, self.h, {"lam": -self.h_min, "h_min": self.h_min, "seed": self.seed, "source": "ppp"})


def _draw_ppp(rng: np.random.Generator, Z: CellMeasure, h_min: float, seed: int) -> GumbelProcessSample:
    n = rng.poisson(Z.total * math.exp(-ALPHA * h_min) / ALPHA)
    h = h_min + rng.standard_exponential(n) / ALPHA
    p = Z.cells.ravel() / Z.total
    cell = rng.choice(p.size, size=n, p=p)
    a, b = np.divmod(cell, Z.m)
    x = (np.column_stack([a, b]) + rng.random((n, 2))) / Z.m
    return GumbelProcessSample(x, h, Z, h_min, seed)


def _check_intensity(Z: CellMeasure, h_min: float) -> None:
    if not (math.isfinite(Z.total) and Z.total > 0):
        raise ValueError("intensity measure needs finite positive total mass")
    if not math.isfinite(h_min):
        raise ValueError("floor h_min must be finite")


def sample_gumbel_ppp(Z: CellMeasure, h_min: float, seed: int) -> GumbelProcessSample:
    """Exact draw: Poisson count, Gumbel-profile heights, positions from ``Ẑ``."""
    _check_intensity(Z, h_min)
    return _draw_ppp(generator(seed), Z, h_min, seed)


def sample_gumbel_ppp_batch(Z: CellMeasure, h_min: float, seed: int, size: int) -> list[GumbelProcessSample]:
    """``size`` independent draws from one generator stream."""
    _check_intensity(Z, h_min)
    rng = generator(seed)
    return [_draw_ppp(rng, Z, h_min, seed) for _ in range(size)]


def sample_max_from_z(z_totals, seed: int) -> np.ndarray:
    """Maxima with ``P(M <= t | Z) = exp(-α^{-1} Z e^{-αt})``."""
    z = np.asarray(z_totals, dtype=float)
    if np.any(z <= 0):
        raise ValueError("Z totals must be positive")
    gumbel = generator(seed).gumbel(size=z.shape)
    return (np.log(z / ALPHA) + gumbel) / ALPHA


def below_floor_compensator(f: TestFunction, z_mass: float, h_min: float) -> float:
    """``E exp(-<η, f>)`` restricted to points below ``h_min``, given ``Z(A) = z_mass``.

    Equals ``exp(-Z(A) ∫_{-∞}^{h_min} (1 - e^{-φ(h)}) e^{-αh} dh)``.
    """
    lo = f.support_lower()
    if lo >= h_min or z_mass == 0:
        return 1.0
    start = lo if math.isfinite(lo) else h_min - 60.0
    if f.kind == "tabulated":
        pts = f.grid[(f.grid > start) & (f.grid < h_min)]
        y = np.concatenate([[start], pts, [h_min]])
        vals = -np.expm1(-f.profile(y)) * np.exp(-ALPHA * y)
        integral = float(integrate.trapezoid(vals, y))
    else:
        integral, _ = integrate.quad(
            lambda y: -math.expm1(-float(f.profile(y))) * math.exp(-ALPHA * y), start, h_min, limit=200
        )
    return math.exp(-z_mass * integral)


def invariance_test(
    measures: Sequence[PointMeasure],
    f: TestFunction,
    t: float,
    slack: float = 0.0,
    seed: int = 0,
    k_sigma: float = 3.0,
    Q: int = 64,
    intensities: Sequence[CellMeasure] | None = None,
    name: str | None = None,
) -> TestReport:
    """Compare ``E e^{-<η,f>}`` with ``E e^{-<η,f_t>}`` and with the Dysonized route.

    Both comparisons use paired per-replicate differences.  When
    ``intensities`` is given (one ``CellMeasure`` per measure, exact PPP
    input truncated at ``h_min``), the contribution of the unobserved points
    below the floor is restored exactly by :func:`below_floor_compensator`.
    """
    if len(measures) < 100:
        raise ValueError(f"need at least 100 measures, got {len(measures)}")
    lo = f.support_lower()
    for m in measures:
        lam = m.meta.get("lam")
        if lam is not None and lo < -lam:
            raise ValueError(f"test function is nonzero below the extraction cutoff -{lam}")
    if f.is_zero:
        ft = f
    else:
        ft = f_t_transform(f, t, Q=Q)
    lhs = laplace_values(measures, f)
    rhs = laplace_values(measures, ft)
    shifted = dyson_shift_batch(measures, t, substream(seed, 1))
    direct = laplace_values(shifted, f)
    if intensities is not None:
        if len(intensities) != len(measures):
            raise ValueError("one intensity per measure required")
        comp = {}
        for i, (m, Z) in enumerate(zip(measures, intensities)):
            key = (id(Z), m.meta["h_min"])
            if key not in comp:
                zA = Z.mass(f.region)
                comp[key] = (
                    below_floor_compensator(f, zA, m.meta["h_min"]),
                    below_floor_compensator(ft, zA, m.meta["h_min"]),
                )
            cf, cft = comp[key]
            lhs[i] *= cf
            rhs[i] *= cft
            direct[i] *= cft
    d1 = lhs - rhs
    d2 = lhs - direct
    boot = substream(seed, 2)
    se1 = bootstrap_mean_stderr(d1, seed=boot)
    se2 = bootstrap_mean_stderr(d2, seed=boot)
    v1 = judge(d1.mean(), se1, k_sigma, slack)
    v2 = judge(d2.mean(), se2, k_sigma, slack)
    order = {PASS: 0, "soft-pass": 1, FAIL: 2}
    verdict = max((v1, v2), key=order.get)
    return TestReport(
        name=name or f"invariance_t{t:g}",
        estimate=float(d1.mean()),
        stderr=se1,
        tolerance=k_sigma * se1 + slack,
        verdict=verdict,
        severity="hard" if slack == 0 else "soft",
        replicates=len(measures),
        details={
            "t": t,
            "laplace_f": float(lhs.mean()),
            "laplace_f_t": float(rhs.mean()),
            "laplace_dysonized": float(direct.mean()),
            "difference_transform": float(d1.mean()),
            "difference_direct": float(d2.mean()),
            "stderr_direct": se2,
            "verdict_transform": v1,
            "verdict_direct": v2,
            "slack": slack,
            "compensated": intensities is not None,
        },
    )


# ---------------------------------------------------------------- Z estimates


def z_from_spacings(heights, min_points: int = 100) -> tuple[np.ndarray, float]:
    """Sequence ``α n e^{α h_n}`` over decreasingly ordered heights, and its tail mean.

    The estimate averages the second half of the sequence.
    """
    if isinstance(heights, PointMeasure):
        heights = heights.h
    h = np.sort(np.asarray(heights, dtype=float))[::-1]
    if len(h) < min_points:
        raise ValueError(f"need at least {min_points} points, got {len(h)}")
    n = np.arange(1, len(h) + 1)
    seq = ALPHA * n * np.exp(ALPHA * h)
    return seq, float(seq[len(seq) // 2 :].mean())


def z_samples_from_measures(measures: Iterable[PointMeasure], region=FULL_SQUARE, min_points: int = 100) -> np.ndarray:
    """Per-replicate ``Z(A)`` from spacings; measures with too few points are skipped."""
    out = []
    for m in measures:
        sub = m.restrict(region) if tuple(region) != FULL_SQUARE else m
        if len(sub) >= min_points:
            out.append(z_from_spacings(sub.h, min_points)[1])
    return np.array(out)


# ------------------------------------------------------------------ max tails


def _survival(sorted_vals: np.ndarray, ts: np.ndarray) -> np.ndarray:
    n = len(sorted_vals)
    return (n - np.searchsorted(sorted_vals, ts, side="left")) / n


def _tail_regression(sorted_vals: np.ndarray, ts: np.ndarray, t_power: float):
    n = len(sorted_vals)
    S = _survival(sorted_vals, ts)
    keep = (S > 0) & (S < 1)
    if keep.sum() < 2:
        return None
    t, s = ts[keep], S[keep]
    y = np.log(s) - t_power * np.log(t)
    w = n * s / (1.0 - s)  # inverse delta-method variance of log S
    X = np.column_stack([np.ones_like(t), t])
    beta = np.linalg.lstsq(X * np.sqrt(w)[:, None], y * np.sqrt(w), rcond=None)[0]
    return -beta[1], math.exp(beta[0])


def lower_tail_check(maxes: MaxSample | np.ndarray, ts: Sequence[float] = (2, 3, 4, 5, 6)) -> dict[str, Any]:
    """Decay of ``P(M <= -t)`` on the lower tail: fitted rate and whether it beats ``e^{-t}``."""
    m = maxes.max_centered if isinstance(maxes, MaxSample) else np.asarray(maxes, dtype=float)
    ts = np.asarray(ts, dtype=float)
    p = np.array([(m <= -t).mean() for t in ts])
    nz = p > 0
    if nz.sum() >= 2:
        slope = float(np.polyfit(ts[nz], np.log(p[nz]), 1)[0])
    else:
        slope = -math.inf  # the tail empties within the window
    return {"t": ts.tolist(), "prob": p.tolist(), "log_slope": slope, "faster_than_exp": bool(slope < -1.0)}


def max_tail_fit(
    maxes: MaxSample | np.ndarray,
    window: tuple[float, float] = (1.5, 4.0),
    t_power: float = 1.0,
    n_points: int = 26,
    bounds: tuple[float, float] = (2.0, 3.1),
    min_replicates: int = 10_000,
    n_boot: int = 1000,
    seed: int = 0,
    severity: str = "soft",
) -> TestReport:
    """Fit ``P(M >= t) ≈ C t^{p} e^{-αt}`` on ``window`` (``p = t_power``).

    Weighted least squares of ``log S(t) - p log t`` against ``t``; the
    verdict checks ``α̂`` against ``bounds``.
    """
    m = maxes.max_centered if isinstance(maxes, MaxSample) else np.asarray(maxes, dtype=float)
    if len(m) < min_replicates:
        raise ValueError(f"need at least {min_replicates} replicates, got {len(m)}")
    lo, hi = window
    if not hi > lo:
        raise ValueError("empty fitting window")
    ts = np.linspace(lo, hi, n_points)
    srt = np.sort(m)
    fit = _tail_regression(srt, ts, t_power)
    if fit is None:
        raise ValueError("fitting window holds no exceedances")
    alpha_hat, c_hat = fit
    rng = generator(seed)
    boots = []
    for _ in range(n_boot):
        res = _tail_regression(np.sort(m[rng.integers(0, len(m), len(m))]), ts, t_power)
        if res is not None:
            boots.append(res)
    boots = np.array(boots)
    se_a = float(np.std(boots[:, 0], ddof=1))
    se_c = float(np.std(boots[:, 1], ddof=1))
    ok = bounds[0] <= alpha_hat <= bounds[1]
    return TestReport(
        name="max_tail_fit",
        estimate=float(alpha_hat),
        stderr=se_a,
        tolerance=float(bounds[1] - bounds[0]) / 2,
        verdict=PASS if ok else FAIL,
        severity=severity,
        replicates=len(m),
        details={
            "alpha_hat": float(alpha_hat),
            "C_star_hat": float(c_hat),
            "C_star_stderr": se_c,
            "alpha_target": ALPHA,
            "window": list(window),
            "t_power": t_power,
            "bounds": list(bounds),
            "lower_tail": lower_tail_check(m),
        },
    )


# --------------------------------------------------------- Laplace transform of Z


def laplace_small_lambda(
    z,
    lam_grid: Sequence[float] = (1e-5, 3e-5, 1e-4, 3e-4, 1e-3),
    agreement: float = 0.15,
    n_boot: int = 1000,
    seed: int = 0,
) -> TestReport:
    """``A(λ) = (1 - E e^{-λZ}) / (λ log 1/λ)`` and ``B(λ) = E(Z e^{-λZ}) / log 1/λ``.

    Both tend to ``C⋆`` as ``λ ↓ 0`` when ``P(Z > z) ~ C⋆/z``.  The plateau of
    each is the intercept of a weighted regression on ``1/log(1/λ)``, which
    removes the leading finite-``λ`` correction.  The verdict checks that the
    two plateaus agree within the relative ``agreement`` (or within three
    combined standard errors); ``log_singularity`` records whether ``A`` has a
    plateau significantly above zero.
    """
    z = np.asarray(z, dtype=float)
    lam = np.asarray(lam_grid, dtype=float)
    if np.any(z <= 0) or not np.all(np.isfinite(z)):
        raise ValueError("Z samples must be positive and finite")
    if np.any(lam >= 1) or np.any(lam <= 0):
        raise ValueError("λ grid must lie in (0, 1)")
    L = np.log(1.0 / lam)

    def functionals(sample):
        e = np.exp(-np.outer(sample, lam))
        A = -np.mean(np.expm1(-np.outer(sample, lam)), axis=0) / (lam * L)
        B = np.mean(sample[:, None] * e, axis=0) / L
        return A, B

    def plateau(vals):
        X = np.column_stack([np.ones_like(L), 1.0 / L])
        return np.linalg.lstsq(X, vals, rcond=None)[0][0]

    A, B = functionals(z)
    pa, pb = plateau(A), plateau(B)
    # plateaus are linear in the per-sample terms, so their standard errors
    # are those of means of per-sample scalars
    X = np.column_stack([np.ones_like(L), 1.0 / L])
    coef = np.linalg.pinv(X)[0]
    ea = (-np.expm1(-np.outer(z, lam)) / (lam * L)) @ coef
    eb = (z[:, None] * np.exp(-np.outer(z, lam)) / L) @ coef
    boot = substream(seed, 3)
    se_a = bootstrap_mean_stderr(ea, n_boot=n_boot, seed=boot)
    se_b = bootstrap_mean_stderr(eb, n_boot=n_boot, seed=boot)
    se_d = bootstrap_mean_stderr(ea - eb, n_boot=n_boot, seed=boot)
    scale = max(abs(pa), abs(pb), 1e-300)
    rel = abs(pa - pb) / scale
    ok = rel <= agreement or abs(pa - pb) <= 3 * se_d
    return TestReport(
        name="laplace_small_lambda",
        estimate=float(0.5 * (pa + pb)),
        stderr=float(0.5 * math.hypot(se_a, se_b)),
        tolerance=agreement,
        verdict=PASS if ok else FAIL,
        severity="soft",
        replicates=len(z),
        details={
            "lambda": lam.tolist(),
            "A": A.tolist(),
            "B": B.tolist(),
            "plateau_A": float(pa),
            "plateau_B": float(pb),
            "stderr_A": float(se_a),
            "stderr_B": float(se_b),
            "relative_disagreement": float(rel),
            "log_singularity": bool(pa > 3 * se_a and pa > 0.05),
        },
    )


# ----------------------------------------------------------- argmax position


def region_weights(x, region) -> np.ndarray:
    """Membership weight in a closed box: 1 inside, 1/2 on an edge, 1/4 at a corner.

    Weights of a partition of ``[0, 1]^2`` into grid-aligned boxes sum to one
    at every point, so lattice points on shared edges are split evenly.
    """
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    a1, b1, a2, b2 = region
    out = np.ones(len(x))
    for c, lo, hi in ((0, a1, b1), (1, a2, b2)):
        v = x[:, c]
        w = ((v > lo) & (v < hi)).astype(float)
        w += 0.5 * (((v == lo) & (lo > 0.0)) | ((v == hi) & (hi < 1.0)))
        w += ((v == lo) & (lo == 0.0)) | ((v == hi) & (hi == 1.0))
        out *= w
    return out


QUADRANTS = ((0.0, 0.5, 0.0, 0.5), (0.0, 0.5, 0.5, 1.0), (0.5, 1.0, 0.0, 0.5), (0.5, 1.0, 0.5, 1.0))


def argmax_joint_law(
    maxes: MaxSample,
    regions: Sequence[tuple[float, float, float, float]] = QUADRANTS,
    ts: Sequence[float] = (-1.0, 0.0, 1.0, 2.0, math.inf),
    z_model: Sequence[CellMeasure] | None = None,
    psi_cells: int = 4,
    high: float = 2.0,
    k_sigma: float = 3.0,
    severity: str = "hard",
) -> TestReport:
    """Empirical ``ν_N(A × (-∞, t])`` with symmetry, Z-model and ``ψ`` comparisons.

    The verdict requires every region's argmax probability to lie within
    ``k_sigma`` standard errors of the mean over ``regions`` (meaningful when
    the regions are images of one another under the square's symmetries).
    """
    for reg in regions:
        if not (reg[1] > reg[0] and reg[3] > reg[2]):
            raise ValueError(f"region {reg} has empty interior")
    n = len(maxes)
    m = maxes.max_centered
    W = np.stack([region_weights(maxes.position, reg) for reg in regions])
    table = np.array([[float(np.mean(w * (m <= t))) for t in ts] for w in W])
    probs = W.mean(axis=1)
    se = np.sqrt(np.maximum(W.var(axis=1, ddof=1), 1e-300) / n)
    dev = probs - probs.mean()
    worst = int(np.argmax(np.abs(dev) / se))
    verdict = PASS if np.all(np.abs(dev) <= k_sigma * se) else FAIL
    details: dict[str, Any] = {"regions": [list(r) for r in regions], "t": list(ts), "table": table, "probabilities": probs}
    if z_model is not None:
        totals = np.array([z.total for z in z_model])
        model = np.array(
            [
                [float(np.mean([z.mass(reg) / z.total for z in z_model] * np.exp(-totals * np.exp(-ALPHA * t) / ALPHA)))
                 if math.isfinite(t) else float(np.mean([z.mass(reg) / z.total for z in z_model]))
                 for t in ts]
                for reg in regions
            ]
        )
        details["model_table"] = model
        details["model_sup_discrepancy"] = float(np.max(np.abs(model - table)))
    hi_mask = m >= high
    details["n_high"] = int(hi_mask.sum())
    if hi_mask.sum() > 0:
        from .dmart.conformal import psi_cell_masses

        k = psi_cells
        cells = [(a / k, (a + 1) / k, b / k, (b + 1) / k) for a in range(k) for b in range(k)]
        emp = np.array([region_weights(maxes.position[hi_mask], c).mean() for c in cells])
        psi_m = psi_cell_masses(k).ravel()
        uni = np.full(k * k, 1.0 / (k * k))
        details["l1_to_psi"] = float(np.abs(emp - psi_m).sum())
        details["l1_to_uniform"] = float(np.abs(emp - uni).sum())
        details["closer_to_psi"] = bool(details["l1_to_psi"] < details["l1_to_uniform"])
    return TestReport(
        name="argmax_joint_law",
        estimate=float(dev[worst]),
        stderr=float(se[worst]),
        tolerance=float(k_sigma * se[worst]),
        verdict=verdict,
        severity=severity,
        replicates=n,
        details=details,
    )


# ------------------------------------------------------------- moments of Z


def hill_estimator(z, k: int | None = None) -> float:
    """Hill estimate of the tail index from the ``k`` largest samples (default ``sqrt(n)``)."""
    z = np.sort(np.asarray(z, dtype=float))[::-1]
    n = len(z)
    k = int(math.isqrt(n)) if k is None else int(k)
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    return float(1.0 / np.mean(np.log(z[:k] / z[k])))


def z_moment_diagnostics(
    z,
    p_grid: Sequence[float] = (-2.0, -1.0, -0.5, 0.0, 0.5, 0.75, 1.0, 1.5),
    k: int | None = None,
    target: float = 1.0,
    tolerance: float = 0.15,
    bounds: tuple[float, float] | None = None,
    severity: str = "hard",
) -> TestReport:
    """Hill tail index, moment growth across ``p`` and the small-``Z`` tail.

    The verdict checks the Hill index against ``bounds`` when given, else
    against ``target`` within relative ``tolerance``.  For each ``p`` the
    ratio of the moment estimate on the full sample to that on its first half
    is reported; it stays near one for finite moments and drifts upward for
    ``p >= 1``.
    """
    z = np.asarray(z, dtype=float)
    if len(z) < 1000:
        raise ValueError(f"need at least 1000 samples, got {len(z)}")
    if np.any(z <= 0):
        raise ValueError("Z samples must be positive")
    hill = hill_estimator(z, k)
    kk = int(math.isqrt(len(z))) if k is None else int(k)
    se = hill / math.sqrt(kk)
    moments = {float(p): float(np.mean(z**p)) for p in p_grid}
    half = z[: len(z) // 2]
    growth = {float(p): float(np.mean(z**p) / np.mean(half**p)) for p in p_grid}
    qs = np.quantile(z, [0.001, 0.01, 0.05, 0.1])
    F = np.array([(z < q).mean() for q in qs])
    small = {"quantiles": qs.tolist(), "cdf": F.tolist()}
    good = (F > 0) & (F < 1) & (qs < 1)
    if good.sum() >= 2:
        # log(-log F) = log c - c' log t on the lower tail
        slope = np.polyfit(np.log(qs[good]), np.log(-np.log(F[good])), 1)[0]
        small["stretched_exponent"] = float(-slope)
    if bounds is not None:
        ok = bounds[0] <= hill <= bounds[1]
        tol = (bounds[1] - bounds[0]) / 2
    else:
        ok = abs(hill - target) <= tolerance * target
        tol = tolerance * target
    return TestReport(
        name="z_moment_diagnostics",
        estimate=hill,
        stderr=se,
        tolerance=tol,
        verdict=PASS if ok else FAIL,
        severity=severity,
        replicates=len(z),
        details={"moments": moments, "moment_growth": growth, "small_z": small, "k": kk},
    )
