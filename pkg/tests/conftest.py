from pathlib import Path

import pytest

from mcdlstm import dse

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance_results: dict[str, str] = {}


@pytest.fixture
def anomaly_table():
    return dse.load_lookup_table(FIXTURES / "lookup_anomaly.csv")


@pytest.fixture
def classification_table():
    return dse.load_lookup_table(FIXTURES / "lookup_classification.csv")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _acceptance_results[report.nodeid.split("::")[-1]] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_acceptance_results.items()):
        status = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}")
