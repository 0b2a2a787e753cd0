import numpy as np
import pytest

from diffmap.graph import Graph


def barbell() -> Graph:
    """Two triangles joined by the edge 2-3."""
    return Graph.from_edges([(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])


def complete(n: int) -> Graph:
    return Graph.from_edges([(i, j) for i in range(n) for j in range(i + 1, n)])


def overlap7() -> Graph:
    """Two triangles {0,1,2}, {4,5,6} and node 3 linked to two nodes of each."""
    tri = [(0, 1), (1, 2), (0, 2), (4, 5), (5, 6), (4, 6)]
    return Graph.from_edges(tri + [(3, 1), (3, 2), (3, 4), (3, 5)])


def random_graph(rng: np.random.Generator, n: int, directed: bool, density: float = 0.35) -> Graph:
    """Connected random weighted graph: a ring (or cycle) plus random extra arcs."""
    edges = [(i, (i + 1) % n, rng.uniform(0.5, 3.0)) for i in range(n)]
    for u in range(n):
        for v in range(n):
            if u != v and rng.random() < density:
                edges.append((u, v, rng.uniform(0.1, 5.0)))
    return Graph.from_edges(edges, directed=directed, n=n)


def random_labels(rng: np.random.Generator, n: int, k_max: int | None = None) -> np.ndarray:
    k = int(rng.integers(1, (k_max or n) + 1))
    return rng.integers(0, k, n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in mod.REPORT:
            terminalreporter.write_line(line)
