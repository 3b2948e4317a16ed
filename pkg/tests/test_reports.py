import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gffx.reports import (
    FAIL,
    PASS,
    SOFT_PASS,
    TestReport,
    bootstrap_mean_stderr,
    bootstrap_stderr,
    judge,
    load_reports,
)

verdicts = st.sampled_from([PASS, SOFT_PASS, FAIL])
floats = st.floats(allow_nan=True, allow_infinity=True)


@given(st.text(min_size=1, max_size=20), floats, floats, floats, verdicts, st.sampled_from(["hard", "soft"]))
def test_report_json_round_trip(name, est, se, tol, verdict, severity):
    r = TestReport(name, est, se, tol, verdict, severity, 7, {"a": [1, 2.5], "b": {"c": np.float64(1.5)}})
    back = TestReport.from_dict(json.loads(r.to_json()))
    for k in ("estimate", "stderr", "tolerance"):
        a, b = getattr(r, k), getattr(back, k)
        assert (math.isnan(a) and math.isnan(b)) or a == b
    assert back.name == name and back.verdict == verdict and back.severity == severity
    assert back.details == {"a": [1, 2.5], "b": {"c": 1.5}}
    assert back.ok == (verdict != FAIL)


def test_load_reports(tmp_path):
    (tmp_path / "sub").mkdir()
    TestReport("a", 1.0, 0.1, 0.5, PASS).save(tmp_path / "a.report.json")
    TestReport("b", 2.0, 0.1, 0.5, FAIL).save(tmp_path / "sub" / "b.report.json")
    (tmp_path / "other.json").write_text("{}")
    names = sorted(r.name for r in load_reports(tmp_path))
    assert names == ["a", "b"]


@pytest.mark.parametrize(
    "dev,se,slack,expected",
    [
        (0.1, 0.05, 0.0, PASS),
        (-0.15, 0.05, 0.0, PASS),
        (0.2, 0.05, 0.0, FAIL),
        (0.2, 0.05, 0.1, SOFT_PASS),
        (0.3, 0.05, 0.1, FAIL),
        (float("nan"), 1.0, 1.0, FAIL),
    ],
)
def test_judge(dev, se, slack, expected):
    assert judge(dev, se, slack=slack) == expected


def test_line_format():
    r = TestReport("x", 0.5, 0.01, 0.05, SOFT_PASS, "soft")
    assert r.line() == "[SOFT-PASS] x: estimate=0.5 stderr=0.01 tol=0.05 (soft)"


def test_bootstrap_mean_matches_analytic():
    v = np.random.default_rng(0).normal(size=2000)
    se = bootstrap_mean_stderr(v, n_boot=2000)
    assert se == pytest.approx(v.std() / math.sqrt(len(v)), rel=0.08)
    two = bootstrap_mean_stderr(np.column_stack([v, 2 * v]), n_boot=500)
    assert two[1] == pytest.approx(2 * two[0], rel=1e-12)


def test_bootstrap_is_seeded_and_degenerate_cases():
    v = np.arange(50.0)
    assert bootstrap_stderr(v, np.median, seed=4) == bootstrap_stderr(v, np.median, seed=4)
    assert bootstrap_stderr(v[:1], np.median) == 0.0
    assert bootstrap_mean_stderr(np.ones(1)) == 0.0
