"""Replicate execution: seeded lattice passes over many fields, optionally in parallel.

A pass samples ``replicates`` independent fields at one ``N`` and keeps only
what the caller asks for (centered maxima and argmax positions always, the
extremal point measure and level-set counts on request).  Replicate ``i``
draws from ``replicate_seed(substream(seed, N), i)``, so results do not depend
on the worker count; the reduction orders results by replicate index.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .extremal import DEFAULT_LAMBDA, default_radius, extract_eta
from .field import centering_mn, sample_field
from .measures import MaxSample, PointMeasure
from .rng import replicate_seeds, substream

__all__ = ["LatticePass", "lattice_pass", "map_chunks", "pass_seeds", "resolve_workers"]

CHUNK = 16


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get("GFFX_WORKERS", "1"))
    return max(1, int(workers))


def map_chunks(fn: Callable, items: Sequence, workers: int = 1, chunk: int = CHUNK) -> list:
    """``[fn(items[i:i+chunk]) ...]`` flattened, in item order."""
    chunks = [list(items[i : i + chunk]) for i in range(0, len(items), chunk)]
    if workers <= 1 or len(chunks) <= 1:
        parts = [fn(c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, chunks))
    return [x for p in parts for x in p]


@dataclass
class LatticePass:
    N: int
    r: int
    lam: float
    seeds: list[int]
    maxes: MaxSample
    etas: list[PointMeasure] | None = None
    counts: dict[float, np.ndarray] = field(default_factory=dict)

    @property
    def replicates(self) -> int:
        return len(self.seeds)


@dataclass(frozen=True)
class _Job:
    N: int
    r: int
    lam: float
    keep_eta: bool
    level_s: tuple[float, ...]

    def __call__(self, seeds: list[int]) -> list[dict[str, Any]]:
        out = []
        mN = centering_mn(self.N)
        logN = math.log(self.N)
        for s in seeds:
            h = sample_field(self.N, s)
            v = h.values
            k = int(np.argmax(v))
            a, b = divmod(k, v.shape[1])
            rec = {"max": float(v[a, b] - mN), "pos": ((a + 1) / self.N, (b + 1) / self.N)}
            if self.keep_eta:
                rec["eta"] = extract_eta(h, self.r, self.lam)
            if self.level_s:
                rec["counts"] = [int(np.count_nonzero(v >= q * logN)) for q in self.level_s]
            out.append(rec)
        return out


def pass_seeds(N: int, replicates: int, seed: int) -> list[int]:
    return replicate_seeds(substream(seed, N), replicates)


def _cache_path(key: dict[str, Any]) -> Path | None:
    root = os.environ.get("GFFX_CACHE_DIR")
    if not root:
        return None
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:24]
    return Path(root) / f"pass-{digest}.pkl"


def lattice_pass(
    N: int,
    replicates: int,
    seed: int,
    r: int | None = None,
    lam: float = DEFAULT_LAMBDA,
    keep_eta: bool = True,
    level_s: Sequence[float] = (),
    workers: int | None = None,
) -> LatticePass:
    """Sample ``replicates`` fields at ``N`` and reduce them.

    Setting ``GFFX_CACHE_DIR`` stores finished passes on disk keyed by every
    argument that affects the numbers.
    """
    r = default_radius(N) if r is None else int(r)
    level_s = tuple(float(q) for q in level_s)
    key = {"N": N, "replicates": replicates, "seed": seed, "r": r, "lam": lam,
           "eta": keep_eta, "s": level_s, "version": __version__}
    path = _cache_path(key)
    if path is not None and path.exists():
        with open(path, "rb") as fh:
            return pickle.load(fh)
    seeds = pass_seeds(N, replicates, seed)
    job = _Job(int(N), r, float(lam), bool(keep_eta), level_s)
    recs = map_chunks(job, seeds, resolve_workers(workers))
    maxes = MaxSample(np.array([x["max"] for x in recs]), np.array([x["pos"] for x in recs]).reshape(-1, 2), N)
    etas = None
    if keep_eta:
        etas = []
        for i, x in enumerate(recs):
            m = x["eta"]
            m.meta["replicate"] = i
            etas.append(m)
    counts = {q: np.array([x["counts"][j] for x in recs]) for j, q in enumerate(level_s)}
    out = LatticePass(int(N), r, float(lam), seeds, maxes, etas, counts)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            pickle.dump(out, fh)
    return out
