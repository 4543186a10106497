from hypothesis import settings

settings.register_profile("attlab", derandomize=True, deadline=None, max_examples=40)
settings.load_profile("attlab")

ACCEPTANCE_LINES = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        ACCEPTANCE_LINES[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for name, title in CRITERIA:
        status = ACCEPTANCE_LINES.get(name, "NOT RUN")
        terminalreporter.write_line(f"{status:7s} {title}")
