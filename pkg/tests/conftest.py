from __future__ import annotations

import numpy as np
import pytest

from rufes.synthetic import generate_corpus


@pytest.fixture(scope="session")
def small_corpus():
    return generate_corpus(10, 5, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
