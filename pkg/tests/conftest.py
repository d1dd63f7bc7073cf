import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(RESULTS, key=lambda l: _order(l)):
        terminalreporter.write_line(line)


def _order(line):
    tag = line.split("criterion ")[-1].split(":")[0]
    try:
        return (0, int(tag))
    except ValueError:
        return (1, 0)
