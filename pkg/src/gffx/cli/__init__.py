"""Command line: manifests, suite execution and report aggregation."""

from .manifest import ExperimentManifest, ManifestError, load_manifest, validate_manifest
from .suites import RunLedger, exit_code, run_suite, summarize

__all__ = [
    "ExperimentManifest",
    "ManifestError",
    "RunLedger",
    "exit_code",
    "load_manifest",
    "run_suite",
    "summarize",
    "validate_manifest",
]
