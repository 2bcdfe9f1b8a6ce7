import numpy as np
import pytest

from kerneldrift.data import generate_syd


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_syd():
    """60 series x 4 segments of 78 steps: quick end-to-end runs."""
    return generate_syd(n_series=60, n_segments=4, segment_len=78, seed=3)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance.py" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    if report.when == "call" or report.outcome != "passed":
        _CRITERIA[name] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda n: int(n.split("_")[2])):
        num = int(name.split("_")[2])
        verdict = "PASS" if _CRITERIA[name] == "passed" else "FAIL"
        title = name.split("_", 3)[3].replace("_", " ")
        terminalreporter.write_line(f"criterion {num:2d}: {verdict}  {title}")
