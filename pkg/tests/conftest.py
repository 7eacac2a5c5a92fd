import numpy as np
import pytest

from mixspec import markov_profile, two_state_example

_acceptance_lines = []


def record_acceptance(number, passed, detail):
    """Remember one criterion result for the end-of-run summary."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    _acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def chain():
    return two_state_example()


@pytest.fixture(scope="session")
def chain_profile(chain):
    return markov_profile(chain)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
