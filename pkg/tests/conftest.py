"""Shared pytest plumbing: the acceptance-criteria result board.

Acceptance tests register one line per criterion through
:func:`record_criterion`; a terminal-summary hook prints the collected
lines after the run, so the pass/fail verdict of every criterion is
visible in the plain ``pytest -v`` output regardless of capture settings.
"""

from collections import OrderedDict

_CRITERIA: "OrderedDict[int, tuple[str, bool, str]]" = OrderedDict()


def record_criterion(index: int, name: str, passed: bool, detail: str) -> None:
    _CRITERIA[index] = (name, passed, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for index in sorted(_CRITERIA):
        name, passed, detail = _CRITERIA[index]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(
            f"criterion {index:2d} {verdict} {name}: {detail}")
