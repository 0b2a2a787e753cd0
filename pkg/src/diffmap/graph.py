"""Weighted graphs, node features and partition files."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

log = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """Raised when an input file cannot be parsed."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Directed weighted graph stored as merged arcs over dense node indices.

    Undirected graphs keep both directions of every edge as separate arcs of
    equal weight; an undirected self-loop is a single arc.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    directed: bool
    node_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.n < 1 or len(self.weight) == 0:
            raise GraphFormatError("empty graph")
        if np.any(self.weight <= 0) or not np.all(np.isfinite(self.weight)):
            raise GraphFormatError("arc weights must be finite and positive")
        if not self.node_ids:
            object.__setattr__(self, "node_ids", tuple(str(i) for i in range(self.n)))
        if len(self.node_ids) != self.n:
            raise GraphFormatError("node_ids length does not match n")
        for a in (self.src, self.dst, self.weight):
            a.setflags(write=False)

    @classmethod
    def from_edges(
        cls,
        edges: Iterable[Sequence],
        directed: bool = False,
        n: int | None = None,
        node_ids: Sequence[str] | None = None,
    ) -> "Graph":
        """Build a graph from ``(u, v[, w])`` tuples over integer node indices.

        Parallel edges are merged by summing weights and zero weights dropped.
        """
        arcs: dict[tuple[int, int], float] = {}
        top = -1
        for e in edges:
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if w < 0:
                raise GraphFormatError(f"negative weight on edge ({u}, {v})")
            top = max(top, u, v)
            if w == 0:
                continue
            arcs[(u, v)] = arcs.get((u, v), 0.0) + w
            if not directed and u != v:
                arcs[(v, u)] = arcs.get((v, u), 0.0) + w
        if n is None:
            n = top + 1
        elif top >= n:
            raise GraphFormatError(f"node index {top} out of range for n={n}")
        if not arcs:
            raise GraphFormatError("empty graph")
        keys = sorted(arcs)
        src = np.fromiter((k[0] for k in keys), dtype=np.int64, count=len(keys))
        dst = np.fromiter((k[1] for k in keys), dtype=np.int64, count=len(keys))
        w = np.fromiter((arcs[k] for k in keys), dtype=np.float64, count=len(keys))
        return cls(n, src, dst, w, directed, tuple(node_ids) if node_ids else ())

    @property
    def num_arcs(self) -> int:
        return len(self.weight)

    @property
    def w_tot(self) -> float:
        return float(self.weight.sum())

    def adjacency(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.weight, (self.src, self.dst)), shape=(self.n, self.n))

    def out_strength(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.weight, minlength=self.n)

    def in_strength(self) -> np.ndarray:
        return np.bincount(self.dst, weights=self.weight, minlength=self.n)

    def index_of(self, node_id: str) -> int:
        return self._id_index[node_id]

    @property
    def _id_index(self) -> dict[str, int]:
        cache = self.__dict__.get("_id_cache")
        if cache is None:
            cache = {nid: i for i, nid in enumerate(self.node_ids)}
            object.__setattr__(self, "_id_cache", cache)
        return cache

    def edges(self) -> list[tuple[str, str, float]]:
        """External-id edge list, each undirected edge reported once."""
        out = []
        for u, v, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()):
            if not self.directed and u > v:
                continue
            out.append((self.node_ids[u], self.node_ids[v], w))
        return out


def _parse_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def load_edge_list(path, directed: bool = False, weighted: bool = True) -> Graph:
    """Read a whitespace separated ``src dst [weight]`` file.

    Node ids are arbitrary tokens, indexed densely in first-seen order. When
    ``weighted`` is false a third column is ignored and every edge counts 1.
    """
    ids: dict[str, int] = {}
    edges = []
    for lineno, line in _parse_lines(Path(path)):
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"{path}:{lineno}: expected 'src dst [weight]', got {line!r}")
        w = 1.0
        if weighted and len(parts) == 3:
            try:
                w = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: bad weight {parts[2]!r}") from None
            if not np.isfinite(w):
                raise GraphFormatError(f"{path}:{lineno}: non-finite weight")
            if w < 0:
                raise GraphFormatError(f"{path}:{lineno}: negative weight {w}")
        u = ids.setdefault(parts[0], len(ids))
        v = ids.setdefault(parts[1], len(ids))
        edges.append((u, v, w))
    if not edges:
        raise GraphFormatError(f"{path}: empty graph")
    return Graph.from_edges(edges, directed=directed, n=len(ids), node_ids=list(ids))


def write_edge_list(graph: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, w in graph.edges():
            fh.write(f"{u} {v} {w!r}\n")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("features must be a 2-d array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("features contain non-finite values")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def identity_features(graph: Graph) -> FeatureMatrix:
    """Use the adjacency matrix as node features."""
    return FeatureMatrix(graph.adjacency().toarray())


def load_features(path, graph: Graph) -> FeatureMatrix:
    """Load node features aligned to the graph's dense indices.

    Two layouts are accepted: CSV with an ``id,f0,f1,...`` header, which must
    list every node, or whitespace ``id col value`` triplets where missing
    entries are zero.
    """
    rows = list(_parse_lines(Path(path)))
    if not rows:
        raise GraphFormatError(f"{path}: no features")
    if "," in rows[0][1]:
        return _load_csv_features(path, rows, graph)
    return _load_triplet_features(path, rows, graph)


def _lookup(graph: Graph, nid: str, path, lineno: int) -> int:
    try:
        return graph.index_of(nid)
    except KeyError:
        raise GraphFormatError(f"{path}:{lineno}: unknown node id {nid!r}") from None


def _load_csv_features(path, rows, graph: Graph) -> FeatureMatrix:
    header = next(csv.reader([rows[0][1]]))
    d = len(header) - 1
    if d < 1:
        raise GraphFormatError(f"{path}: no features")
    X = np.full((graph.n, d), np.nan)
    seen = np.zeros(graph.n, dtype=bool)
    for lineno, line in rows[1:]:
        rec = next(csv.reader([line]))
        if len(rec) != d + 1:
            raise GraphFormatError(f"{path}:{lineno}: expected {d} features, got {len(rec) - 1}")
        i = _lookup(graph, rec[0].strip(), path, lineno)
        try:
            X[i] = [float(x) for x in rec[1:]]
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: non-numeric feature") from None
        if not np.all(np.isfinite(X[i])):
            raise GraphFormatError(f"{path}:{lineno}: non-finite feature value")
        seen[i] = True
    if len(rows) == 1:
        raise GraphFormatError(f"{path}: no features")
    if not seen.all():
        missing = [graph.node_ids[i] for i in np.flatnonzero(~seen)[:5]]
        raise GraphFormatError(f"{path}: dimension mismatch, no features for nodes {missing}")
    return FeatureMatrix(X)


def _load_triplet_features(path, rows, graph: Graph) -> FeatureMatrix:
    entries = []
    for lineno, line in rows:
        parts = line.split()
        if len(parts) != 3:
            raise GraphFormatError(f"{path}:{lineno}: expected 'id col value'")
        i = _lookup(graph, parts[0], path, lineno)
        try:
            j, val = int(parts[1]), float(parts[2])
        except ValueError:
            raise GraphFormatError(f"{path}:{lineno}: bad triplet {line!r}") from None
        if j < 0:
            raise GraphFormatError(f"{path}:{lineno}: negative column index")
        if not np.isfinite(val):
            raise GraphFormatError(f"{path}:{lineno}: non-finite feature value")
        entries.append((i, j, val))
    d = max(e[1] for e in entries) + 1
    X = np.zeros((graph.n, d))
    for i, j, val in entries:
        X[i, j] += val
    return FeatureMatrix(X)


def connected_components(graph: Graph) -> tuple[np.ndarray, int]:
    """Weakly connected component labels and their count."""
    count, labels = _cc(graph.adjacency(), directed=True, connection="weak")
    return labels, int(count)


def check_connected(graph: Graph, strict: bool = False) -> int:
    _, count = connected_components(graph)
    if count > 1:
        msg = f"graph has {count} weakly connected components"
        if strict:
            raise ValueError(msg)
        log.warning(msg + "; clustering assumes a connected network")
    return count


@dataclass(frozen=True)
class Partition:
    """Hard node-to-module assignment with dense 0-based labels."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if len(labels):
            used = np.unique(labels)
            if used[0] < 0 or used[-1] != len(used) - 1:
                raise ValueError("labels must be dense in [0, module_count)")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        """Relabel arbitrary hashable labels densely in first-seen order."""
        remap: dict = {}
        dense = [remap.setdefault(x, len(remap)) for x in np.asarray(labels).tolist()]
        return cls(np.array(dense, dtype=np.int64))

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def module_count(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    def one_hot(self) -> np.ndarray:
        S = np.zeros((self.n, self.module_count))
        S[np.arange(self.n), self.labels] = 1.0
        return S

    def canonical(self) -> "Partition":
        """Same grouping, labels renumbered in first-seen order."""
        return Partition.from_labels(self.labels)

    def same_grouping(self, other: "Partition") -> bool:
        return self.canonical() == other.canonical()

    def __eq__(self, other):
        # exact label equality; use same_grouping to ignore label names
        return isinstance(other, Partition) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())


def load_partition(path, graph: Graph) -> Partition:
    """Read ``id label`` lines; every graph node needs exactly one label."""
    labels: list = [None] * graph.n
    for lineno, line in _parse_lines(Path(path)):
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected 'id label'")
        i = _lookup(graph, parts[0], path, lineno)
        if labels[i] is not None and labels[i] != parts[1]:
            raise GraphFormatError(f"{path}:{lineno}: node {parts[0]!r} labelled twice")
        labels[i] = parts[1]
    missing = [graph.node_ids[i] for i, lab in enumerate(labels) if lab is None]
    if missing:
        raise GraphFormatError(f"{path}: no label for nodes {missing[:5]}")
    return Partition.from_labels(labels)


def write_partition(graph: Graph, part: Partition, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for nid, lab in zip(graph.node_ids, part.labels.tolist()):
            fh.write(f"{nid} {lab}\n")


def load_lfr(network_path, community_path, directed: bool = False) -> tuple[Graph, Partition]:
    """Read LFR benchmark ``network.dat``/``community.dat`` files.

    Node ids are 1-based integers ``1..n`` and are mapped to index ``id - 1``.
    Undirected LFR files list every edge in both directions, so reciprocal
    lines are collapsed instead of summed.
    """
    raw = []
    for lineno, line in _parse_lines(Path(network_path)):
        parts = line.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"{network_path}:{lineno}: expected 'i j [w]'")
        try:
            u, v = int(parts[0]) - 1, int(parts[1]) - 1
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise GraphFormatError(f"{network_path}:{lineno}: bad line {line!r}") from None
        if u < 0 or v < 0:
            raise GraphFormatError(f"{network_path}:{lineno}: LFR ids start at 1")
        raw.append((u, v, w))
    if not directed:
        undirected: dict[tuple[int, int], float] = {}
        for u, v, w in raw:
            undirected.setdefault((min(u, v), max(u, v)), w)
        raw = [(u, v, w) for (u, v), w in undirected.items()]

    memberships: dict[int, int] = {}
    for lineno, line in _parse_lines(Path(community_path)):
        parts = line.split()
        if len(parts) < 2:
            raise GraphFormatError(f"{community_path}:{lineno}: expected 'i c'")
        # overlapping LFR lists several communities; keep the first
        memberships[int(parts[0]) - 1] = int(parts[1])
    n = max(max(max(u, v) for u, v, _ in raw) + 1, max(memberships) + 1)
    missing = [i + 1 for i in range(n) if i not in memberships]
    if missing:
        raise GraphFormatError(f"{community_path}: no community for nodes {missing[:5]}")
    graph = Graph.from_edges(raw, directed=directed, n=n, node_ids=[str(i + 1) for i in range(n)])
    return graph, Partition.from_labels([memberships[i] for i in range(n)])
