import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, passed: bool, detail: str) -> None:
        line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}: {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=1234))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
