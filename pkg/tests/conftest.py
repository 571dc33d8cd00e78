import sys

import pytest

from biofilm_inverse.model import example1, example2


@pytest.fixture(scope="session")
def ex1():
    return example1()


@pytest.fixture(scope="session")
def ex2():
    return example2()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    import acceptance_checks as checks

    terminalreporter.section("acceptance criteria")
    for key in checks.CRITERIA:
        if key not in mod.RESULTS:
            continue
        entry = mod.RESULTS[key]
        if key == "8":
            ok = all(r[0] for r in entry)
            detail = "; ".join(("" if r[0] else "FAIL ") + r[1] for r in entry)
            entry = checks.line(key, ok, detail)
        terminalreporter.write_line(entry)
