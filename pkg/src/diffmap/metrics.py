"""Partition quality: adjusted mutual information, module counts, mixing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .graph import Graph, Partition


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    counts: np.ndarray  # k x l integer counts

    @classmethod
    def from_labels(cls, a: np.ndarray, b: np.ndarray) -> "ContingencyTable":
        if len(a) != len(b):
            raise ValueError(f"label vectors differ in length ({len(a)} vs {len(b)})")
        _, ai = np.unique(a, return_inverse=True)
        _, bi = np.unique(b, return_inverse=True)
        counts = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
        np.add.at(counts, (ai, bi), 1)
        return cls(counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def rows(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def cols(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def _entropy(marginal: np.ndarray, n: int) -> float:
    p = marginal[marginal > 0] / n
    return float(-(p * np.log(p)).sum())


def mutual_information(table: ContingencyTable) -> float:
    n = table.n
    c = table.counts
    nz = c > 0
    outer = np.outer(table.rows, table.cols)
    return float((c[nz] / n * (np.log(c[nz] * n) - np.log(outer[nz]))).sum())


def expected_mutual_information(table: ContingencyTable) -> float:
    """Expected MI of two labelings with these marginals under random
    permutation (hypergeometric cell counts), in nats.

    Probabilities are assembled in log space from log-factorials.
    """
    n = table.n
    a = table.rows.astype(np.int64)
    b = table.cols.astype(np.int64)
    log_fact = gammaln(np.arange(1, n + 2, dtype=np.float64))

    def lfact(k):
        return log_fact[np.asarray(k)]

    emi = 0.0
    const = lfact(a)[:, None] + lfact(b)[None, :] + lfact(n - a)[:, None] + lfact(n - b)[None, :] - lfact(n)
    for i in range(len(a)):
        for j in range(len(b)):
            lo = max(1, a[i] + b[j] - n)
            hi = min(a[i], b[j])
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1)
            logp = const[i, j] - lfact(nij) - lfact(a[i] - nij) - lfact(b[j] - nij) - lfact(n - a[i] - b[j] + nij)
            term = nij / n * (np.log(n * nij) - np.log(a[i] * b[j]))
            emi += float((term * np.exp(logp)).sum())
    return emi


def ami(pred: Partition, truth: Partition, average: str = "arithmetic") -> float:
    """Adjusted mutual information ``(MI - E[MI]) / (mean(H) - E[MI])``.

    ``average`` selects the entropy normaliser, ``"arithmetic"`` or ``"max"``.
    Partitions that agree up to relabelling score exactly 1.
    """
    a = np.asarray(getattr(pred, "labels", pred))
    b = np.asarray(getattr(truth, "labels", truth))
    table = ContingencyTable.from_labels(a, b)
    k, l = table.counts.shape
    if k == l and np.count_nonzero(table.counts) == k:
        return 1.0
    if k == 1 or l == 1:
        return 0.0
    n = table.n
    h_a, h_b = _entropy(table.rows, n), _entropy(table.cols, n)
    if average == "arithmetic":
        norm = (h_a + h_b) / 2
    elif average == "max":
        norm = max(h_a, h_b)
    else:
        raise ValueError(f"unknown normaliser {average!r}")
    mi = mutual_information(table)
    emi = expected_mutual_information(table)
    denom = norm - emi
    if abs(denom) < np.finfo(float).eps:
        denom = np.finfo(float).eps if denom >= 0 else -np.finfo(float).eps
    return float((mi - emi) / denom)


def count_modules(part: Partition) -> int:
    return int(len(np.unique(part.labels)))


def count_modules_soft(S: np.ndarray, threshold: float | None = None) -> int:
    """Columns in use: those that are some node's argmax, or, with a
    threshold, those whose largest membership reaches it."""
    if threshold is None:
        return int(len(np.unique(np.argmax(S, axis=1))))
    return int((S.max(axis=0) >= threshold).sum())


def mixing(graph: Graph, part: Partition) -> float:
    """Fraction of total arc weight running between different modules."""
    labels = part.labels
    cross = labels[graph.src] != labels[graph.dst]
    return float(graph.weight[cross].sum() / graph.w_tot)
