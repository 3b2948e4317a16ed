import json
import re
from pathlib import Path

import numpy as np
import pytest
import yaml

from gffx.cli import main as cli
from gffx.cli.manifest import (
    SUITES,
    ExperimentManifest,
    ManifestError,
    default_manifest_path,
    load_manifest,
    manifest_hash,
    validate_manifest,
)
from gffx.cli.suites import exit_code, render_markdown, summarize
from gffx.field import load_raw, sample_field
from gffx.pipeline import pass_seeds
from gffx.reports import FAIL, PASS, SOFT_PASS, TestReport


def _write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


@pytest.mark.parametrize("suite", SUITES)
def test_shipped_manifests_validate(suite):
    data = load_manifest(default_manifest_path(suite))
    assert validate_manifest(data) == []
    m = ExperimentManifest.from_dict(data)
    assert ExperimentManifest.from_dict(m.to_dict()) == m


@pytest.mark.parametrize(
    "data,message",
    [
        ({"suite": "dmart-crossval", "N": [100], "K": [8]}, "N not divisible by K (N=100, K=8)"),
        ({"suite": "extract", "N": []}, "N: list is empty"),
        ({"suite": "invariance", "N": [16], "t": [2.0]}, "t: 2.0 exceeds g log N"),
        ({"suite": "nope"}, "suite: must be one of"),
        ({"suite": "sample", "seed": -1}, "seed: -1 is not an unsigned 64-bit integer"),
        ({"suite": "sample", "bogus": 1}, "unknown field 'bogus'"),
        ({"suite": "extract", "N": [64], "r_rule": {"table": {32: 6}}}, "r_rule.table: no radius for N=64"),
        ({"suite": "invariance", "lam": 2.0, "f": [{"kind": "indicator-product", "a": -3.0}]}, "below the cutoff"),
        ({"suite": "aux-max", "b_K": 0.2}, "b_K: 0.2 must exceed"),
    ],
)
def test_validation_messages(data, message):
    errors = validate_manifest(data)
    assert any(message in e for e in errors), errors
    with pytest.raises(ManifestError):
        ExperimentManifest.from_dict(data)


def test_validation_reports_every_error():
    errors = validate_manifest({"suite": "dmart-crossval", "N": [100, 30], "K": [8], "delta": 0.7, "workers": 0})
    assert len(errors) == 4


def test_radius_rules():
    assert ExperimentManifest("extract").radius(512) == 23
    assert ExperimentManifest("extract", N=[64], r_rule={"table": {"64": 5}}).radius(64) == 5


def test_hash_ignores_output_location():
    a = ExperimentManifest("sample", out="x", workers=1)
    b = ExperimentManifest("sample", out="y", workers=4)
    assert manifest_hash(a) == manifest_hash(b)
    assert manifest_hash(a) != manifest_hash(ExperimentManifest("sample", seed=1))


def test_validate_command(tmp_path, capsys):
    good = _write(tmp_path, "good.yaml", {"suite": "sample", "N": [8]})
    assert cli.main(["validate", "--manifest", good]) == 0
    assert capsys.readouterr().out.strip() == "ok"
    bad = _write(tmp_path, "bad.yaml", {"suite": "dmart-crossval", "N": [100], "K": [8]})
    assert cli.main(["validate", "--manifest", bad]) == 3
    assert "invalid: N not divisible by K (N=100, K=8)" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["sample"], ["validate", "--manifest", "/does/not/exist.yaml"]])
def test_usage_errors_exit_3(argv):
    assert cli.main(argv) == 3


def test_sample_suite_is_deterministic_and_resumable(tmp_path):
    man = _write(tmp_path, "s.yaml", {"suite": "sample", "N": [8], "replicates": 4, "seed": 5})
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sample", "--manifest", man, "--out", str(out1)]) == 0
    assert cli.main(["sample", "--manifest", man, "--out", str(out2), "--workers", "2"]) == 0
    assert (out1 / "summary.json").read_bytes() == (out2 / "summary.json").read_bytes()
    seeds = pass_seeds(8, 4, 5)
    for i, s in enumerate(seeds):
        f = load_raw(out1 / "fields" / "N8" / f"rep{i:05d}.bin")
        assert f.seed == s and np.array_equal(f.values, sample_field(8, s).values)
        assert (out1 / "fields" / "N8" / f"rep{i:05d}.bin").stat().st_size == 32 + 8 * 49
    ledger = json.loads((out1 / "ledger.json").read_text())
    before = (out1 / "summary.json").read_bytes()
    assert cli.main(["sample", "--manifest", man, "--out", str(out1)]) == 0
    assert json.loads((out1 / "ledger.json").read_text())["artifacts"] == ledger["artifacts"]
    assert (out1 / "summary.json").read_bytes() == before


def test_resume_recomputes_corrupted_artifacts(tmp_path):
    man = _write(tmp_path, "s.yaml", {"suite": "sample", "N": [8], "replicates": 2})
    out = tmp_path / "o"
    cli.main(["sample", "--manifest", man, "--out", str(out)])
    target = out / "fields" / "N8" / "rep00001.bin"
    good = target.read_bytes()
    target.write_bytes(b"junk")
    assert cli.main(["sample", "--manifest", man, "--out", str(out)]) == 0
    assert target.read_bytes() == good


def test_invariance_suite_report_cardinality(tmp_path, capsys):
    man = _write(tmp_path, "i.yaml", {
        "suite": "invariance", "N": [16], "replicates": 120, "lam": 3.0, "t": [0.5, 1.0],
        "f": [{"kind": "indicator-product", "a": -1.0}, {"kind": "smooth-bump", "a": -1.0, "b": 1.0}],
    })
    out = tmp_path / "o"
    code = cli.main(["invariance", "--manifest", man, "--out", str(out)])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["total"] == 4
    assert sorted(p.name for p in (out / "reports").glob("*.report.json")) == sorted(
        f"invariance_N16_f{i}_t{t}.report.json" for i in (0, 1) for t in ("0.5", "1")
    )
    assert code == summary["exit_code"] == exit_code([TestReport.from_dict(r) for r in summary["reports"]])
    assert (out / "eta_N16.jsonl").exists() and (out / "max_N16.csv").exists()
    assert "invariance: pass" in capsys.readouterr().out


def _reports(tmp_path, verdicts):
    d = tmp_path / "reports"
    d.mkdir()
    for i, (v, sev) in enumerate(verdicts):
        TestReport(f"t{i}", 0.1 * i, 0.01, 0.05, v, sev, details={"wall_seconds": 1.5, "x": i}).save(d / f"t{i}.report.json")
    return d


@pytest.mark.parametrize(
    "verdicts,code",
    [
        ([(PASS, "hard"), (SOFT_PASS, "soft")], 0),
        ([(PASS, "hard"), (FAIL, "soft")], 1),
        ([(FAIL, "hard"), (FAIL, "soft"), (SOFT_PASS, "hard")], 2),
    ],
)
def test_report_recounts_and_exit_codes(tmp_path, capsys, verdicts, code):
    d = _reports(tmp_path, verdicts)
    assert cli.main(["report", "--in", str(d), "--format", "json"]) == code
    summary = json.loads((d / "report.json").read_text())
    expected = {PASS: 0, SOFT_PASS: 0, FAIL: 0}
    for v, _ in verdicts:
        expected[v] += 1
    assert summary["counts"] == expected
    assert summary["total"] == len(verdicts)
    assert all("wall_seconds" not in r["details"] for r in summary["reports"])
    assert cli.main(["report", "--in", str(d), "--format", "md"]) == code
    md = (d / "report.md").read_text()
    assert len(re.findall(r"^\| t\d+ \|", md, re.M)) == len(verdicts)
    assert f"(exit code {code})" in md


def test_markdown_rendering_matches_summary():
    reps = [TestReport("a", 1.0, 0.1, 0.2, PASS), TestReport("b", float("nan"), 0.1, 0.2, FAIL, "soft")]
    s = summarize(reps, "x")
    md = render_markdown(s)
    assert md.startswith("# gffx summary: x")
    assert "| b | fail | soft | nan |" in md
