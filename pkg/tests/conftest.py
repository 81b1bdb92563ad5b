import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ssbm.graph import SignedGraph

settings.register_profile(
    "ssbm", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ssbm")


def random_signed(rng, n, density=0.5, directed=False):
    """Dense random signed adjacency with zero diagonal."""
    adj = rng.choice([-1, 0, 1], size=(n, n),
                     p=[density / 2, 1 - density, density / 2])
    if not directed:
        adj = np.triu(adj, 1)
        adj = adj + adj.T
    np.fill_diagonal(adj, 0)
    return SignedGraph(adj.astype(np.int8), directed=directed)


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
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
