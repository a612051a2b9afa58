from __future__ import annotations

import os

# every DESPOT backup in the suite asserts lower <= upper
os.environ.setdefault("CYBERPOMDP_CHECK_BOUNDS", "1")

import pytest  # noqa: E402

from cyberpomdp.micronet import MicroConfig, MicroNet  # noqa: E402


@pytest.fixture
def deterministic_net() -> MicroNet:
    """Attacker always moves, attacks always succeed, sensors are perfect."""
    return MicroNet(MicroConfig(fpr=0.0, fnr=0.0, p_nil=0.0, p_succ=1.0))


@pytest.fixture
def idle_net() -> MicroNet:
    return MicroNet(MicroConfig(p_nil=1.0))


@pytest.fixture
def noisy_net() -> MicroNet:
    return MicroNet(MicroConfig(fpr=0.1, fnr=0.0, p_nil=0.9))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criterion")


_ACCEPTANCE: dict[str, list[tuple[str, float]]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::", 1)[1].split("[", 1)[0]
        _ACCEPTANCE.setdefault(name, []).append((report.outcome, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        runs = _ACCEPTANCE[name]
        ok = all(outcome == "passed" for outcome, _ in runs)
        seconds = sum(d for _, d in runs)
        number = int(name.split("_")[2])
        terminalreporter.write_line(
            f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {name}  ({seconds:.1f}s)")
