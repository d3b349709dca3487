"""Collects the acceptance-suite outcomes and prints one PASS/FAIL line per criterion."""

_outcomes: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    name = props.get("criterion", report.nodeid.split("::")[-1])
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else "FAIL"
        if name in _outcomes and _outcomes[name][0] == "FAIL":
            return
        _outcomes[name] = (status, props.get("detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_outcomes, key=lambda s: int(s.split()[0]) if s.split()[0].isdigit() else 99):
        status, detail = _outcomes[name]
        terminalreporter.write_line(f"{status}  criterion {name}" + (f"  [{detail}]" if detail else ""))
