"""Suite execution, the run ledger and summaries."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .. import __version__, acceptance
from ..dmart import chaos
from ..extremal import daviaud_from_counts
from ..field import dump_raw, load_raw, sample_field
from ..limit_laws import (
    TestFunction,
    argmax_joint_law,
    invariance_test,
    laplace_small_lambda,
    max_tail_fit,
    z_moment_diagnostics,
    z_samples_from_measures,
)
from ..measures import write_point_measures
from ..pipeline import map_chunks, pass_seeds, lattice_pass, resolve_workers
from ..reports import FAIL, PASS, SOFT_PASS, TestReport, load_reports
from ..rng import substream
from .manifest import ExperimentManifest, manifest_hash

__all__ = ["RunLedger", "run_suite", "summarize", "exit_code", "render_markdown"]

LEDGER = "ledger.json"
SUMMARY = "summary.json"


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


@dataclass
class RunLedger:
    """What a run produced: seeds, artifacts with checksums, timings and completed tasks."""

    manifest_hash: str
    version: str = __version__
    seeds: dict[str, list[int]] = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)
    completed: dict[str, list[str]] = field(default_factory=dict)
    exit_code: int | None = None

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), sort_keys=True, indent=2) + "\n")

    @classmethod
    def load(cls, path: Path) -> "RunLedger":
        return cls(**json.loads(path.read_text()))


@dataclass
class _TaskOutput:
    reports: list[TestReport] = field(default_factory=list)
    artifacts: list[Path] = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)


class SuiteRun:
    """One execution of a manifest, resuming completed tasks from an earlier ledger."""

    def __init__(self, manifest: ExperimentManifest, resume: bool = True):
        self.m = manifest
        self.out = Path(manifest.out)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "reports").mkdir(exist_ok=True)
        self.workers = resolve_workers(manifest.workers)
        h = manifest_hash(manifest)
        old = self.out / LEDGER
        self.ledger = RunLedger(h)
        self.previous = None
        if resume and old.exists():
            prev = RunLedger.load(old)
            if prev.manifest_hash == h and prev.version == __version__:
                self.previous = prev
        self.reports: list[TestReport] = []
        self.resumed: list[str] = []

    def rel(self, p: Path) -> str:
        return str(Path(p).resolve().relative_to(self.out.resolve()))

    def _reusable(self, key: str) -> bool:
        p = self.previous
        if p is None or key not in p.completed:
            return False
        for rel in p.completed[key]:
            f = self.out / rel
            if not f.exists() or p.artifacts.get(rel) != sha256_file(f):
                return False
        return True

    def task(self, key: str, fn: Callable[[], _TaskOutput]) -> None:
        if self._reusable(key):
            p = self.previous
            files = p.completed[key]
            for rel in files:
                self.ledger.artifacts[rel] = p.artifacts[rel]
                if rel.endswith(".report.json"):
                    self.reports.append(TestReport.from_dict(json.loads((self.out / rel).read_text())))
            self.ledger.completed[key] = files
            if key in p.seeds:
                self.ledger.seeds[key] = p.seeds[key]
            self.ledger.timings[key] = p.timings.get(key, 0.0)
            self.resumed.append(key)
            return
        t0 = time.perf_counter()
        res = fn()
        files = []
        for rep in res.reports:
            path = self.out / "reports" / f"{rep.name}.report.json"
            rep.save(path)
            files.append(path)
            self.reports.append(rep)
        files.extend(res.artifacts)
        rels = [self.rel(f) for f in files]
        for rel, f in zip(rels, files):
            self.ledger.artifacts[rel] = sha256_file(f)
        self.ledger.completed[key] = rels
        if res.seeds:
            self.ledger.seeds[key] = [int(s) for s in res.seeds]
        self.ledger.timings[key] = time.perf_counter() - t0
        self.ledger.save(self.out / LEDGER)  # checkpoint after every task

    def finish(self) -> RunLedger:
        summary = summarize(self.reports, suite=self.m.suite)
        summary.update(
            manifest_hash=self.ledger.manifest_hash,
            version=__version__,
            seed=self.m.seed,
            artifacts={k: v for k, v in sorted(self.ledger.artifacts.items()) if not k.startswith("reports/")},
        )
        (self.out / SUMMARY).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
        self.ledger.exit_code = summary["exit_code"]
        self.ledger.save(self.out / LEDGER)
        return self.ledger


# ------------------------------------------------------------------ summaries


def exit_code(reports: list[TestReport]) -> int:
    """2 on any hard failure, 1 when every failure is soft, else 0 (soft passes count as passes)."""
    if any(r.verdict == FAIL and r.severity == "hard" for r in reports):
        return 2
    if any(r.verdict == FAIL for r in reports):
        return 1
    return 0


def _strip_wall(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _strip_wall(v) for k, v in obj.items() if not str(k).startswith("wall_")}
    if isinstance(obj, list):
        return [_strip_wall(v) for v in obj]
    return obj


def summarize(reports: list[TestReport], suite: str | None = None) -> dict[str, Any]:
    """Counts by verdict and the reports themselves, with wall-clock fields removed."""
    reports = sorted(reports, key=lambda r: r.name)
    counts = {PASS: 0, SOFT_PASS: 0, FAIL: 0}
    for r in reports:
        counts[r.verdict] = counts.get(r.verdict, 0) + 1
    return {
        "suite": suite,
        "counts": counts,
        "total": len(reports),
        "hard_failures": sorted(r.name for r in reports if r.verdict == FAIL and r.severity == "hard"),
        "soft_failures": sorted(r.name for r in reports if r.verdict == FAIL and r.severity != "hard"),
        "exit_code": exit_code(reports),
        "reports": [_strip_wall(r.to_dict()) for r in reports],
    }


def _fmt(x: float) -> str:
    return f"{x:.6g}" if isinstance(x, (int, float)) else str(x)


def render_markdown(summary: dict[str, Any]) -> str:
    c = summary["counts"]
    lines = [
        f"# gffx summary: {summary.get('suite') or 'reports'}",
        "",
        f"pass {c.get(PASS, 0)}, soft-pass {c.get(SOFT_PASS, 0)}, fail {c.get(FAIL, 0)} "
        f"(exit code {summary['exit_code']})",
        "",
        "| test | verdict | severity | estimate | stderr | tolerance | replicates |",
        "|---|---|---|---|---|---|---|",
    ]
    for r in summary["reports"]:
        lines.append(
            f"| {r['name']} | {r['verdict']} | {r['severity']} | {_fmt(r['estimate'])} | "
            f"{_fmt(r['stderr'])} | {_fmt(r['tolerance'])} | {r['replicates']} |"
        )
    return "\n".join(lines) + "\n"


def report_directory(directory: str | Path) -> dict[str, Any]:
    return summarize(load_reports(directory))


# -------------------------------------------------------------------- suites


def _test_functions(m: ExperimentManifest) -> list[TestFunction]:
    out = []
    for spec in m.f:
        a, b, beta = float(spec.get("a", 0.0)), spec.get("b"), float(spec.get("beta", 1.0))
        if spec["kind"] == "indicator-product":
            out.append(TestFunction.indicator(a, None if b is None else float(b), beta))
        else:
            out.append(TestFunction.bump(a, float(b), beta))
    return out


@dataclass(frozen=True)
class _DumpJob:
    N: int
    directory: str

    def __call__(self, items: list[tuple[int, int]]) -> list[str]:
        out = []
        for i, seed in items:
            path = Path(self.directory) / f"rep{i:05d}.bin"
            dump_raw(sample_field(self.N, seed), path)
            out.append(str(path))
        return out


def suite_sample(run: SuiteRun) -> None:
    m = run.m
    for N in m.N:
        def fn(N=N):
            seeds = pass_seeds(N, m.replicates, m.seed)
            d = run.out / "fields" / f"N{N}"
            d.mkdir(parents=True, exist_ok=True)
            paths = map_chunks(_DumpJob(N, str(d)), list(enumerate(seeds)), run.workers)
            bad = 0
            for p, s in zip(paths, seeds):
                back = load_raw(p)
                bad += int(back.seed != s or not np.array_equal(back.values, sample_field(N, s).values))
            arts = [Path(p) for p in paths] + [Path(p + ".json") for p in paths]
            rep = TestReport(f"sample_N{N}", float(bad), 0.0, 0.0, PASS if bad == 0 else FAIL,
                             replicates=len(seeds), details={"N": N, "roundtrip_mismatches": bad})
            return _TaskOutput([rep], arts, seeds)
        run.task(f"sample/N={N}", fn)


def _write_pass(run: SuiteRun, lp) -> list[Path]:
    arts = []
    if lp.etas is not None:
        p = run.out / f"eta_N{lp.N}.jsonl"
        write_point_measures(p, lp.etas)
        arts.append(p)
    p = run.out / f"max_N{lp.N}.csv"
    lp.maxes.to_csv(p)
    arts.append(p)
    return arts


def suite_extract(run: SuiteRun) -> None:
    m = run.m
    for N in m.N:
        def fn(N=N):
            lp = lattice_pass(N, m.replicates, m.seed, m.radius(N), m.lam, workers=run.workers)
            # the highest point of every nonempty measure is the field maximum
            bad = 0
            for eta, mx in zip(lp.etas, lp.maxes.max_centered):
                if mx >= -m.lam:
                    bad += int(len(eta) == 0 or eta.h.max() != mx)
                else:
                    bad += int(len(eta) != 0)
            sizes = np.array([len(e) for e in lp.etas])
            rep = TestReport(f"extract_N{N}", float(bad), 0.0, 0.0, PASS if bad == 0 else FAIL,
                             replicates=m.replicates,
                             details={"N": N, "r": lp.r, "lam": m.lam, "mean_points": float(sizes.mean()),
                                      "max_points": int(sizes.max()), "max_mismatches": bad})
            return _TaskOutput([rep], _write_pass(run, lp), lp.seeds)
        run.task(f"extract/N={N}", fn)


def suite_invariance(run: SuiteRun) -> None:
    m = run.m
    fs = _test_functions(m)
    for N in m.N:
        def fn(N=N):
            lp = lattice_pass(N, m.replicates, m.seed, m.radius(N), m.lam, workers=run.workers)
            reps = []
            for i, f in enumerate(fs):
                for t in m.t:
                    name = f"invariance_N{N}_f{i}_t{t:g}"
                    reps.append(invariance_test(lp.etas, f, t, slack=m.slack,
                                                seed=substream(m.seed, N, i, int(round(1000 * t))), name=name))
            return _TaskOutput(reps, _write_pass(run, lp), lp.seeds)
        run.task(f"invariance/N={N}", fn)


def suite_limit_tests(run: SuiteRun) -> None:
    m = run.m
    for N in m.N:
        def fn(N=N):
            lp = lattice_pass(N, m.replicates, m.seed, m.radius(N), m.lam, level_s=(0.8,), workers=run.workers)
            reps = []
            r = argmax_joint_law(lp.maxes)
            r.name = f"argmax_joint_law_N{N}"
            reps.append(r)
            if m.replicates >= 10_000:
                r = max_tail_fit(lp.maxes, seed=substream(m.seed, N, 1))
                r.name = f"max_tail_fit_N{N}"
                reps.append(r)
            reps.append(daviaud_from_counts(lp.counts[0.8][:200], N, 0.8))
            z = z_samples_from_measures(lp.etas)
            if len(z) >= 100:
                r = laplace_small_lambda(z, seed=substream(m.seed, N, 2))
                r.name = f"laplace_small_lambda_N{N}"
                reps.append(r)
            return _TaskOutput(reps, _write_pass(run, lp), lp.seeds)
        run.task(f"limit-tests/N={N}", fn)


def _write_column(path: Path, name: str, values) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rep", name])
        for i, v in enumerate(values):
            w.writerow([i, repr(float(v))])
    return path


def suite_dmart(run: SuiteRun) -> None:
    m = run.m
    for K in m.K:
        run.task(f"dmart/ck/K={K}", lambda K=K: _TaskOutput(
            [acceptance.check_ck_structure(K, seed=substream(m.seed, K), resolution=m.resolution)]))

        def zk(K=K):
            z = chaos.zk_totals(K, m.nodes, m.delta, substream(m.seed, K, 1), m.replicates, m.c_star)
            path = _write_column(run.out / f"zk_K{K}.csv", "Z_total", z)
            reps = []
            if K > 1 and len(z) >= 1000:
                r = z_moment_diagnostics(z, bounds=(0.7, 1.3), severity="soft")
                r.name = f"zk_moments_K{K}"
                reps.append(r)
            return _TaskOutput(reps, [path])
        run.task(f"dmart/zk/K={K}", zk)
    if len(m.K) >= 2:
        run.task("dmart/variance-growth", lambda: _TaskOutput([acceptance.check_variance_growth(sorted(m.K))]))
    run.task("dmart/psi", lambda: _TaskOutput([acceptance.check_psi(seed=m.seed)]))


def suite_dmart_crossval(run: SuiteRun) -> None:
    m = run.m
    passes = {}

    def maxima(N):
        if N not in passes:
            passes[N] = lattice_pass(N, m.replicates, m.seed, m.radius(N), m.lam, keep_eta=False, workers=run.workers)
        return passes[N]
    for K in m.K:
        if len(m.N) >= 2:
            run.task(f"dmart-crossval/coarse/K={K}", lambda K=K: _TaskOutput([acceptance.check_coarse_crossval(
                sorted(m.N), K, m.replicates, substream(m.seed, K))]))
        for N in m.N:
            def fn(N=N, K=K):
                lp = maxima(N)
                r = acceptance.check_dmart_vs_lattice(lp, K, m.replicates, m.nodes, m.delta, substream(m.seed, K, N))
                return _TaskOutput([r], _write_pass(run, lp), lp.seeds)
            run.task(f"dmart-crossval/max-law/N={N}/K={K}", fn)


def suite_aux_max(run: SuiteRun) -> None:
    m = run.m
    for K in m.K:
        run.task(f"aux-max/marginals/K={K}", lambda K=K: _TaskOutput([acceptance.check_aux_marginals(
            K, m.draws, substream(m.seed, K), m.b_K, m.C_star)]))

        def law(K=K):
            cfg = chaos.AuxProcessConfig(K, m.delta, m.b_K, m.C_star)
            phis = chaos.sample_phi_batch(K, m.nodes, m.delta, substream(m.seed, K, 2), m.replicates)
            seeds = pass_seeds(K, m.replicates, substream(m.seed, K, 3))
            part = chaos.SquarePartition(K, m.nodes, m.delta)
            maxima = []
            for vals, s in zip(phis, seeds):
                phi = chaos.ContinuumFieldSample(part, vals, s)
                maxima.append(chaos.sample_aux_process(cfg, phi, s).maximum)
            maxima = np.array(maxima)
            path = _write_column(run.out / f"aux_max_K{K}.csv", "max", maxima)
            reps = []
            if K > 1:
                z = chaos.zk_totals(K, m.nodes, m.delta, substream(m.seed, K, 4), m.replicates, m.c_star)
                if np.any(z > 0):
                    reps.append(chaos.dmart_vs_lattice_report(z, maxima, name=f"aux_max_law_K{K}"))
            return _TaskOutput(reps, [path], seeds)
        run.task(f"aux-max/law/K={K}", law)


def suite_acceptance(run: SuiteRun) -> None:
    m = run.m
    ctx = acceptance.AcceptanceContext(seed=m.seed, workers=run.workers)
    numbers = sorted(acceptance.CRITERIA) if m.criteria == "all" else sorted(m.criteria)
    for n in numbers:
        run.task(f"acceptance/C{n:02d}", lambda n=n: _TaskOutput([acceptance.run_criterion(n, ctx)]))


def suite_report(run: SuiteRun) -> None:
    # aggregation only: reports already present under the output directory
    existing = [p for p in sorted((run.out / "reports").glob("*.report.json"))]
    run.reports.extend(TestReport.from_dict(json.loads(p.read_text())) for p in existing)
    for p in existing:
        run.ledger.artifacts[run.rel(p)] = sha256_file(p)


SUITE_FUNCTIONS: dict[str, Callable[[SuiteRun], None]] = {
    "sample": suite_sample,
    "extract": suite_extract,
    "invariance": suite_invariance,
    "limit-tests": suite_limit_tests,
    "dmart": suite_dmart,
    "dmart-crossval": suite_dmart_crossval,
    "aux-max": suite_aux_max,
    "acceptance": suite_acceptance,
    "report": suite_report,
}


def run_suite(manifest: ExperimentManifest, resume: bool = True) -> RunLedger:
    """Execute ``manifest.suite``; outputs go to ``manifest.out``.

    Writes per-test reports under ``reports/``, data artifacts, ``summary.json``
    (no wall-clock content) and ``ledger.json``.  With ``resume`` a task that a
    previous run of the same manifest completed, and whose files still match
    their recorded checksums, is not recomputed.
    """
    run = SuiteRun(manifest, resume=resume)
    SUITE_FUNCTIONS[manifest.suite](run)
    return run.finish()
