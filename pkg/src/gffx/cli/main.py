"""``gffx`` entry point.

    gffx <suite> --manifest PATH [--seed U64] [--workers INT] [--out DIR] [--no-resume]
    gffx validate --manifest PATH
    gffx report --in DIR --format json|md

Exit codes: 0 all pass, 1 soft failures only, 2 hard failure, 3 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from ..reports import TestReport
from .manifest import SUITES, ExperimentManifest, ManifestError, load_manifest, validate_manifest
from .suites import SUMMARY, render_markdown, report_directory, run_suite

USAGE_ERROR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gffx", description="Discrete Gaussian free field extremes: experiment runner.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUITES:
        s = sub.add_parser(name, help=f"run the {name} suite")
        s.add_argument("--manifest", required=name != "report", help="YAML or JSON manifest")
        s.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
        s.add_argument("--workers", type=int, help="worker processes (default: $GFFX_WORKERS or 1)")
        s.add_argument("--out", help="output directory (default: $GFFX_OUT or the manifest's)")
        s.add_argument("--no-resume", action="store_true", help="recompute tasks an earlier run completed")
        if name == "report":
            s.add_argument("--in", dest="indir", help="directory holding *.report.json files")
            s.add_argument("--format", choices=("json", "md"), default="json")
    v = sub.add_parser("validate", help="check a manifest and list every violation")
    v.add_argument("--manifest", required=True)
    return p


def _load(path: str) -> dict:
    try:
        data = load_manifest(path)
    except FileNotFoundError:
        raise ManifestError([f"manifest {path} does not exist"])
    except Exception as exc:  # malformed YAML/JSON
        raise ManifestError([f"cannot parse {path}: {exc}"])
    if not isinstance(data, dict):
        raise ManifestError(["manifest must be a mapping"])
    return data


def _build(args) -> ExperimentManifest:
    data = _load(args.manifest)
    data["suite"] = args.command
    if args.seed is not None:
        data["seed"] = args.seed
    if args.workers is not None:
        data["workers"] = args.workers
    elif "workers" not in data and os.environ.get("GFFX_WORKERS"):
        data["workers"] = int(os.environ["GFFX_WORKERS"])
    if args.out is not None:
        data["out"] = args.out
    elif "out" not in data and os.environ.get("GFFX_OUT"):
        data["out"] = os.environ["GFFX_OUT"]
    return ExperimentManifest.from_dict(data)


def _report_dir(indir: str, fmt: str) -> int:
    d = Path(indir)
    if not d.is_dir():
        print(f"gffx: error: {indir} is not a directory", file=sys.stderr)
        return USAGE_ERROR
    summary = report_directory(d)
    if fmt == "md":
        text = render_markdown(summary)
        (d / "report.md").write_text(text)
    else:
        text = json.dumps(summary, sort_keys=True, indent=2) + "\n"
        (d / "report.json").write_text(text)
    sys.stdout.write(text)
    return summary["exit_code"]


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if args.command == "validate":
            errors = validate_manifest(_load(args.manifest))
            if errors:
                for e in errors:
                    print(f"invalid: {e}", file=sys.stderr)
                return USAGE_ERROR
            print("ok")
            return 0
        if args.command == "report" and args.manifest is None:
            if args.indir is None:
                print("gffx report: error: give --in DIR or --manifest PATH", file=sys.stderr)
                return USAGE_ERROR
            return _report_dir(args.indir, args.format)
        manifest = _build(args)
    except ManifestError as exc:
        for e in exc.errors:
            print(f"invalid: {e}", file=sys.stderr)
        return USAGE_ERROR
    ledger = run_suite(manifest, resume=not args.no_resume)
    summary = json.loads((Path(manifest.out) / SUMMARY).read_text())
    for r in summary["reports"]:
        print(TestReport.from_dict(r).line())
    c = summary["counts"]
    print(f"{manifest.suite}: pass {c['pass']}, soft-pass {c['soft-pass']}, fail {c['fail']} -> {manifest.out}")
    return int(ledger.exit_code)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
