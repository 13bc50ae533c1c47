"""Shared test helpers: random graph factories and small named graphs."""
import numpy as np
import pytest

from fairfilt.graph import build_graph, normalized_operators
from fairfilt.spectral import decompose


def random_connected_graph(rng, n, p):
    """Erdos-Renyi-style graph, resampled until connected with no isolated nodes."""
    for _ in range(100):
        upper = np.triu(rng.random((n, n)) < p, k=1)
        src, dst = np.nonzero(upper)
        adjacency = np.zeros((n, n), dtype=bool)
        adjacency[src, dst] = True
        adjacency |= adjacency.T
        if not adjacency.any(axis=1).all():
            continue
        reached = np.zeros(n, dtype=bool)
        frontier = np.zeros(n, dtype=bool)
        frontier[0] = True
        while frontier.any():
            reached |= frontier
            frontier = adjacency[frontier].any(axis=0) & ~reached
        if reached.all():
            return build_graph(list(zip(src.tolist(), dst.tolist())), n)
    raise AssertionError(f"could not sample a connected graph (n={n}, p={p})")


def random_sensitive(rng, n):
    """Random +-1 vector guaranteed to contain both groups."""
    s = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    s[0] = -1.0
    s[1] = 1.0
    return s


def edge_graph():
    return build_graph([(0, 1)], 2)


def triangle_graph():
    return build_graph([(0, 1), (1, 2), (0, 2)], 3)


def path3_graph():
    return build_graph([(0, 1), (1, 2)], 3)


def star_graph():
    return build_graph([(0, 1), (0, 2), (0, 3)], 4)


@pytest.fixture(scope="session")
def edge_spec():
    return decompose(normalized_operators(edge_graph()))
