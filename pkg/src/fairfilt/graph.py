"""Undirected graph construction and degree-normalized operators.

Graphs are unweighted, loop-free and stored densely: the target scale is a
few thousand nodes and the spectral machinery downstream needs the full
matrices anyway. Isolated nodes are rejected outright because the
degree-normalized adjacency divides by sqrt(degree).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IndexOutOfRange, IsolatedNode, SelfLoop


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph.

    Attributes:
        n: Number of nodes.
        edges: Deduplicated edges as sorted (i, j) pairs with i < j.
        adjacency: Symmetric 0/1 matrix with zero diagonal.
        degrees: Node degrees (all >= 1 by construction).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: np.ndarray
    degrees: np.ndarray

    @property
    def edge_count(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class NormalizedOperators:
    """Degree-normalized adjacency and the normalized Laplacian.

    ``a_hat`` is D^{-1/2} A D^{-1/2}; ``laplacian`` is I - a_hat, computed
    from the same floating-point a_hat so the identity holds exactly.
    """

    a_hat: np.ndarray
    laplacian: np.ndarray

    @property
    def n(self) -> int:
        return self.a_hat.shape[0]


def build_graph(edge_list, n: int) -> Graph:
    """Build a validated graph from an edge list.

    Duplicate edges (in either orientation) collapse to one. Raises
    SelfLoop, IndexOutOfRange, or IsolatedNode on invalid input.
    """
    if n < 1:
        raise IndexOutOfRange(0, n)
    unique = set()
    for i, j in edge_list:
        i = int(i)
        j = int(j)
        if i == j:
            raise SelfLoop(i)
        for node in (i, j):
            if node < 0 or node >= n:
                raise IndexOutOfRange(node, n)
        unique.add((i, j) if i < j else (j, i))

    edges = tuple(sorted(unique))
    adjacency = np.zeros((n, n))
    for i, j in edges:
        adjacency[i, j] = 1.0
        adjacency[j, i] = 1.0
    degrees = adjacency.sum(axis=1).astype(np.int64)
    for node in range(n):
        if degrees[node] == 0:
            raise IsolatedNode(node)
    return Graph(n=n, edges=edges, adjacency=_freeze(adjacency), degrees=_freeze(degrees))


def normalized_operators(g: Graph) -> NormalizedOperators:
    """Compute D^{-1/2} A D^{-1/2} and I minus it."""
    inv_sqrt = 1.0 / np.sqrt(g.degrees.astype(np.float64))
    a_hat = g.adjacency * inv_sqrt[:, None] * inv_sqrt[None, :]
    laplacian = np.eye(g.n) - a_hat
    return NormalizedOperators(a_hat=_freeze(a_hat), laplacian=_freeze(laplacian))
