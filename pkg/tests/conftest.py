import pytest

# (criterion id, description, passed, measured detail) collected by tests/test_acceptance.py
ACCEPTANCE_RESULTS = []


@pytest.fixture
def report():
    def record(cid, name, passed, detail):
        ACCEPTANCE_RESULTS.append((str(cid), name, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} [{cid}] {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for cid, name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} [{cid}] {name}: {detail}")
