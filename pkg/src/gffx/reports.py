"""Test reports and the bootstrap used for every standard error."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .rng import generator

__all__ = [
    "PASS",
    "SOFT_PASS",
    "FAIL",
    "TestReport",
    "bootstrap_stderr",
    "bootstrap_mean_stderr",
    "judge",
    "load_reports",
]

PASS = "pass"
SOFT_PASS = "soft-pass"
FAIL = "fail"

DEFAULT_BOOTSTRAP = 1000
LARGE_SAMPLE = 200_000


@dataclass
class TestReport:
    """Outcome of one named statistic.

    ``verdict`` is ``pass`` when the estimate is within the statistical
    tolerance, ``soft-pass`` when it only fits after the configured
    finite-size slack, and ``fail`` otherwise.  ``severity`` records whether a
    failure should be treated as hard or soft by the command line exit code.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    estimate: float
    stderr: float
    tolerance: float
    verdict: str
    severity: str = "hard"
    replicates: int = 0
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict != FAIL

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TestReport":
        keys = cls.__dataclass_fields__.keys()
        kw = {k: v for k, v in data.items() if k in keys}
        for k in ("estimate", "stderr", "tolerance"):
            kw[k] = float(kw[k])  # "nan" / "inf" strings round-trip through float()
        return cls(**kw)

    def line(self) -> str:
        return (
            f"[{self.verdict.upper():9s}] {self.name}: estimate={self.estimate:.6g} "
            f"stderr={self.stderr:.3g} tol={self.tolerance:.3g} ({self.severity})"
        )


def judge(deviation: float, stderr: float, k_sigma: float = 3.0, slack: float = 0.0) -> str:
    """Verdict for ``|deviation|`` against ``k_sigma * stderr`` plus slack."""
    dev = abs(deviation)
    if not math.isfinite(dev):
        return FAIL
    if dev <= k_sigma * stderr:
        return PASS
    if slack > 0 and dev <= k_sigma * stderr + slack:
        return SOFT_PASS
    return FAIL


def bootstrap_stderr(
    values: np.ndarray,
    statistic: Callable[[np.ndarray], float],
    n_boot: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> float:
    """Nonparametric bootstrap standard error of ``statistic(values)``.

    ``values`` is resampled along its first axis.
    """
    values = np.asarray(values)
    n = len(values)
    if n < 2:
        return 0.0
    rng = generator(seed)
    stats = np.empty(n_boot)
    for b in range(n_boot):
        stats[b] = statistic(values[rng.integers(0, n, n)])
    return float(np.std(stats, ddof=1))


def bootstrap_mean_stderr(
    values: np.ndarray, n_boot: int = DEFAULT_BOOTSTRAP, seed: int = 0, chunk: int = 64
) -> float | np.ndarray:
    """Bootstrap standard error of the mean, columnwise for 2-D input.

    Resampling weights are drawn as multinomial counts in chunks.  Above
    ``LARGE_SAMPLE`` observations the exact bootstrap value
    ``sd / sqrt(n)`` (plug-in standard deviation) is returned instead.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n < 2:
        return 0.0 if values.ndim == 1 else np.zeros(values.shape[1])
    flat = values.reshape(n, -1)
    if n > LARGE_SAMPLE:
        # the resampling noise is negligible here; use the exact (infinite
        # resample) bootstrap value of the standard error of a mean
        se = np.std(flat, axis=0, ddof=0) / math.sqrt(n)
        return float(se[0]) if values.ndim == 1 else se
    rng = generator(seed)
    means = np.empty((n_boot, flat.shape[1]))
    pvals = np.full(n, 1.0 / n)
    done = 0
    while done < n_boot:
        b = min(chunk, max(1, 4_000_000 // n), n_boot - done)
        counts = rng.multinomial(n, pvals, size=b)
        means[done : done + b] = counts @ flat / n
        done += b
    se = np.std(means, axis=0, ddof=1)
    return float(se[0]) if values.ndim == 1 else se


def load_reports(directory: str | Path) -> list[TestReport]:
    out = []
    for path in sorted(Path(directory).rglob("*.report.json")):
        out.append(TestReport.from_dict(json.loads(path.read_text())))
    return out


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj
