import pytest

CRITERIA = {
    1: "ACTG setup1 reproduction (S-OLS 0.300, T-OLS 0.601)",
    2: "ACTG setup2 reproduction (S-OLS 1.67, T-OLS 1.31, ordering)",
    3: "IHDP reproduction (747 = 139 + 608; S-OLS 4.78, T-OLS 2.02)",
    4: "ATT pin over 1,000 IHDP replications",
    5: "S vs T behaviour on simple and complex effect surfaces",
    6: "oracle-equivalence suite under 60 s",
    7: "invariant suite under 5 min",
    8: "no-data fallback",
}

_results = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    n = marker.kwargs["criterion"]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if report.skipped:
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
            _results[n] = ("SKIP", reason.removeprefix("Skipped: "))
        else:
            _results[n] = ("PASS" if report.passed else "FAIL", getattr(item, "acceptance_note", ""))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n not in _results:
            continue
        status, note = _results[n]
        line = f"ACCEPTANCE {n}: {status} - {title}"
        terminalreporter.write_line(line + (f" [{note}]" if note else ""))
