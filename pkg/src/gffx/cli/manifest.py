"""Experiment manifests: loading, validation and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from ..constants import G

__all__ = [
    "ExperimentManifest",
    "SUITES",
    "ManifestError",
    "default_manifest_path",
    "load_manifest",
    "validate_manifest",
    "manifest_hash",
]

SUITES = ("sample", "extract", "invariance", "limit-tests", "dmart", "dmart-crossval", "aux-max", "acceptance", "report")
SPLIT_SUITES = ("dmart-crossval",)


class ManifestError(ValueError):
    """Invalid manifest; ``errors`` lists every violation found."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class ExperimentManifest:
    suite: str
    N: list[int] = field(default_factory=lambda: [64])
    replicates: int = 100
    draws: int = 1_000_000
    r_rule: dict[str, Any] = field(default_factory=lambda: {"power": 0.5})
    lam: float = 6.0
    t: list[float] = field(default_factory=lambda: [0.5, 1.0])
    K: list[int] = field(default_factory=lambda: [4])
    delta: float = 0.1
    nodes: int = 2
    resolution: int = 8
    c_star: float = 1.0
    C_star: float = 1.0
    b_K: float | None = None
    f: list[dict[str, Any]] = field(default_factory=lambda: [{"kind": "indicator-product", "a": -1.0, "beta": 1.0}])
    slack: float = 0.05
    criteria: list[int] | str = "all"
    seed: int = 0
    workers: int = 1
    out: str = "gffx-out"

    def radius(self, N: int) -> int:
        rule = self.r_rule
        if "table" in rule:
            return int({int(k): v for k, v in rule["table"].items()}[int(N)])
        return int(math.ceil(N ** float(rule["power"]) - 1e-12))

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentManifest":
        errors = validate_manifest(data)
        if errors:
            raise ManifestError(errors)
        known = {f.name for f in fields(cls)}
        d = copy.deepcopy({k: v for k, v in data.items() if k in known})
        for key in ("N", "K", "t"):
            if key in d and not isinstance(d[key], list):
                d[key] = [d[key]]
        return cls(**d)


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _as_list(x):
    return x if isinstance(x, list) else [x]


def validate_manifest(data: Any) -> list[str]:
    """Every violation of the manifest schema and its cross-field constraints."""
    if not isinstance(data, dict):
        return ["manifest must be a mapping"]
    errs: list[str] = []
    known = {f.name for f in fields(ExperimentManifest)}
    for k in data:
        if k not in known:
            errs.append(f"unknown field {k!r}")
    suite = data.get("suite")
    if suite not in SUITES:
        errs.append(f"suite: must be one of {', '.join(SUITES)} (got {suite!r})")
    Ns = _as_list(data.get("N", [64]))
    if len(Ns) == 0:
        errs.append("N: list is empty")
    for n in Ns:
        if not _int(n) or n < 2:
            errs.append(f"N: {n!r} is not an integer >= 2")
    reps = data.get("replicates", 100)
    if not _int(reps) or reps < 1:
        errs.append(f"replicates: {reps!r} is not a positive integer")
    rule = data.get("r_rule", {"power": 0.5})
    if not isinstance(rule, dict) or len(rule) != 1 or next(iter(rule)) not in ("power", "table"):
        errs.append("r_rule: must be {power: a} or {table: {N: r}}")
    elif "power" in rule:
        a = rule["power"]
        if not _num(a) or not 0 < a < 1:
            errs.append(f"r_rule.power: {a!r} not in (0, 1)")
    else:
        table = rule["table"]
        if not isinstance(table, dict):
            errs.append("r_rule.table: must map N to r")
        else:
            tab = {}
            for k, v in table.items():
                try:
                    tab[int(k)] = v
                except (TypeError, ValueError):
                    errs.append(f"r_rule.table: key {k!r} is not an integer")
            for k, v in tab.items():
                if not _int(v) or v < 1:
                    errs.append(f"r_rule.table: radius {v!r} for N={k} is not an integer >= 1")
            for n in Ns:
                if _int(n) and n not in tab:
                    errs.append(f"r_rule.table: no radius for N={n}")
    lam = data.get("lam", 6.0)
    if not _num(lam):
        errs.append(f"lam: {lam!r} is not a finite number")
    ts = _as_list(data.get("t", [0.5, 1.0]))
    for t in ts:
        if not _num(t) or t <= 0:
            errs.append(f"t: {t!r} is not a positive number")
        elif suite == "invariance":
            for n in Ns:
                if _int(n) and n >= 2 and t > G * math.log(n):
                    errs.append(f"t: {t} exceeds g log N = {G * math.log(n):.4f} for N={n}")
    Ks = _as_list(data.get("K", [4]))
    if len(Ks) == 0:
        errs.append("K: list is empty")
    for k in Ks:
        if not _int(k) or k < 1:
            errs.append(f"K: {k!r} is not a positive integer")
    if suite in SPLIT_SUITES:
        for n in Ns:
            for k in Ks:
                if _int(n) and _int(k) and k >= 1 and n % k:
                    errs.append(f"N not divisible by K (N={n}, K={k})")
    delta = data.get("delta", 0.1)
    if not _num(delta) or not 0 <= delta < 0.5:
        errs.append(f"delta: {delta!r} not in [0, 1/2)")
    for key in ("nodes", "resolution", "workers", "draws"):
        v = data.get(key, 1)
        if not _int(v) or v < 1:
            errs.append(f"{key}: {v!r} is not a positive integer")
    for key in ("c_star", "C_star"):
        v = data.get(key, 1.0)
        if not _num(v) or v <= 0:
            errs.append(f"{key}: {v!r} is not a positive number")
    bk = data.get("b_K")
    if bk is not None and (not _num(bk) or bk <= 1 / math.sqrt(2 * math.pi)):
        errs.append(f"b_K: {bk!r} must exceed 1/sqrt(2 pi)")
    slack = data.get("slack", 0.05)
    if not _num(slack) or slack < 0:
        errs.append(f"slack: {slack!r} is not a nonnegative number")
    for i, spec in enumerate(_as_list(data.get("f", []))):
        if not isinstance(spec, dict) or spec.get("kind") not in ("indicator-product", "smooth-bump"):
            errs.append(f"f[{i}]: kind must be indicator-product or smooth-bump")
            continue
        a = spec.get("a", 0.0)
        if not _num(a):
            errs.append(f"f[{i}].a: {a!r} is not a finite number")
        elif _num(lam) and a < -lam:
            errs.append(f"f[{i}].a: support starts below the cutoff -lam = {-lam}")
        b = spec.get("b")
        if b is not None and (not _num(b) or not _num(a) or b <= a):
            errs.append(f"f[{i}].b: must be a number above a")
        if spec["kind"] == "smooth-bump" and b is None:
            errs.append(f"f[{i}].b: smooth bumps need an upper end")
        beta = spec.get("beta", 1.0)
        if not _num(beta) or beta < 0:
            errs.append(f"f[{i}].beta: {beta!r} is not a nonnegative number")
    crit = data.get("criteria", "all")
    if crit != "all":
        if not isinstance(crit, list) or not all(_int(c) and 1 <= c <= 17 for c in crit):
            errs.append("criteria: must be 'all' or a list of integers in 1..17")
    seed = data.get("seed", 0)
    if not _int(seed) or not 0 <= seed < 2**64:
        errs.append(f"seed: {seed!r} is not an unsigned 64-bit integer")
    out = data.get("out", "gffx-out")
    if not isinstance(out, str) or not out:
        errs.append("out: must be a nonempty path")
    return errs


def load_manifest(path: str | Path) -> dict[str, Any]:
    """Parse a YAML (or JSON) manifest into a plain mapping."""
    text = Path(path).read_text()
    if str(path).endswith(".json"):
        return json.loads(text)
    data = yaml.safe_load(text)
    return {} if data is None else data


def manifest_hash(m: ExperimentManifest) -> str:
    """Hash of the numerical content; output location and worker count do not enter."""
    d = m.to_dict()
    d.pop("out")
    d.pop("workers")
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def default_manifest_path(suite: str) -> Path:
    """Path of the shipped default manifest for ``suite``."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    return Path(__file__).resolve().parent.parent / "manifests" / f"{suite}.yaml"
