"""The sidecar must pass the host project's protocol conformance suite."""

import sys

import pytest

from modelzip.conformance import run_conformance


def endpoint(model: str) -> str:
    return f"run:{sys.executable} -m modelzip_sidecar serve --mock {model}"


@pytest.mark.parametrize("model", ["uniform", "adaptive0"])
def test_mock_mode_passes_conformance(model):
    report = run_conformance(endpoint(model))
    assert report.passed, "\n".join(report.summary_lines())
