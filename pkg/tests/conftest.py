"""One PASS/FAIL line per acceptance criterion in the terminal summary."""

import pytest

_results: dict[str, tuple[bool, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    key, title = mark.args
    measured = dict(item.user_properties).get("measured", "")
    prev_ok = _results.get(key, (True,))[0]
    _results[key] = (prev_ok and rep.passed, title, measured)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_results, key=lambda k: int(k[2:])):
        ok, title, measured = _results[key]
        line = f"{'PASS' if ok else 'FAIL'}  {key}  {title}"
        if measured:
            line += f"  [{measured}]"
        terminalreporter.write_line(line)
