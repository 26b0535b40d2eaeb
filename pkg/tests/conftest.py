import pytest

from ctclab.oracle import MachineCorpus


@pytest.fixture(scope="session")
def corpus():
    return MachineCorpus.load()


@pytest.fixture(scope="session")
def halt3(corpus):
    return corpus.spec("HALT3")


@pytest.fixture(scope="session")
def looper(corpus):
    return corpus.spec("LOOPER")


_CRITERIA = {}


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        detail = dict(report.user_properties).get("detail", "")
        _CRITERIA[crit] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_CRITERIA, key=lambda c: int(c[2:])):
        outcome, detail = _CRITERIA[crit]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{crit} {status} {detail}")
