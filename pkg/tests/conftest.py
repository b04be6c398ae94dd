"""Shared pytest wiring: the acceptance summary table.

Acceptance tests register themselves before their asserts so the summary
lists every criterion that ran, failures included.
"""

_CRITERIA = {}


def record_criterion(num, description, passed, detail=""):
    _CRITERIA[int(num)] = (str(description), bool(passed), str(detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        description, passed, detail = _CRITERIA[num]
        tag = "PASS" if passed else "FAIL"
        line = f"[{tag}] criterion {num:02d}: {description}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
