from __future__ import annotations

from pathlib import Path

import pytest

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "conley_waves" / "scenarios"

CRITERIA = {
    1: "spectral oracle, harmonic oscillator",
    2: "spectral oracle, Poschl-Teller",
    3: "Morse count vs Sylvester inertia",
    4: "eigenfunction decay",
    5: "Lyapunov identity under dt refinement",
    6: "tail certificate and negative control",
    7: "Duhamel and projection identities",
    8: "non-resonant end-to-end",
    9: "resonant indices",
    10: "shift identity and corollary clauses",
    11: "boundary-exit geometry",
    12: "determinism and exit-code contract",
}

_outcomes: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def scenario_path():
    return lambda name: SCENARIOS / f"{name}.yaml"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(n, []).append(report.outcome == "passed")


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        results = _outcomes.get(n)
        if results is None:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} [{status}] {CRITERIA[n]}")
