import _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _report.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for index, name in enumerate(_report.ORDERED, start=1):
        if name in _report.RESULTS:
            verdict = "PASS" if _report.RESULTS[name] else "FAIL"
        else:
            verdict = "NOT RUN"
        terminalreporter.write_line(f"criterion {index}: {verdict:7s} {name}")
