import re

_VERDICTS: dict[int, str] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_", report.nodeid)
    if m and report.when == "call":
        _VERDICTS[int(m.group(1))] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_VERDICTS):
        terminalreporter.write_line(f"criterion {k}: {_VERDICTS[k]}")
