import os

import pytest

# criterion number -> (passed, title, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(passed), title, detail)
    return record


@pytest.fixture(scope="session")
def acceptance_cache(tmp_path_factory):
    """Checkpoint directory for the Monte-Carlo experiment.

    Set CYLPERSIST_ACCEPTANCE_CACHE to keep raw values between runs; the
    default is a fresh temporary directory.
    """
    path = os.environ.get("CYLPERSIST_ACCEPTANCE_CACHE")
    if path:
        os.makedirs(path, exist_ok=True)
        return path
    return str(tmp_path_factory.mktemp("acceptance"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, max(8, max(ACCEPTANCE)) + 1):
        if number not in ACCEPTANCE:
            terminalreporter.write_line(f"[FAIL] {number}. no result recorded (deselected or errored)")
            continue
        passed, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
