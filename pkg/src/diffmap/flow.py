"""Random-walk flow: transition matrix, visit rates and the flow matrix."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .graph import Graph

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.15


def transition_matrix(graph: Graph) -> sp.csr_matrix:
    """Row-normalised adjacency; rows of nodes without out-arcs stay zero."""
    out = graph.out_strength()
    w = graph.weight / out[graph.src]
    return sp.csr_matrix((w, (graph.src, graph.dst)), shape=(graph.n, graph.n))


def visit_rates_closed_form(graph: Graph) -> np.ndarray:
    """Strength-proportional visit rates of an undirected graph."""
    if graph.directed:
        raise ValueError("closed-form visit rates need an undirected graph")
    s = graph.out_strength()
    return s / s.sum()


class VisitRates(NamedTuple):
    p: np.ndarray
    iterations: int
    converged: bool


def visit_rates_power_iteration(
    graph: Graph,
    alpha: float = DEFAULT_ALPHA,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> VisitRates:
    """Stationary visit rates under smart teleportation.

    With probability ``alpha`` the walker jumps to a node chosen in proportion
    to its in-strength, otherwise it follows an out-arc. Nodes without out-arcs
    always teleport, so probability mass is conserved. The iterate starts at the
    normalised in-strength vector and is renormalised after every sweep.
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    T = transition_matrix(graph)
    TT = T.T.tocsr()
    d_in = graph.in_strength()
    teleport = d_in / graph.w_tot
    dangling = graph.out_strength() == 0

    p = teleport.copy()
    for it in range(1, max_iter + 1):
        jump = alpha + (1 - alpha) * p[dangling].sum()
        nxt = jump * teleport + (1 - alpha) * (TT @ p)
        nxt /= nxt.sum()
        delta = np.abs(nxt - p).sum()
        p = nxt
        if delta < tol:
            return VisitRates(p, it, True)
    log.warning("power iteration did not converge in %d sweeps (last change %.3g)", max_iter, delta)
    return VisitRates(p, max_iter, False)


def flow_matrix(graph: Graph, p: np.ndarray, alpha: float = DEFAULT_ALPHA) -> sp.csr_matrix:
    """Per-arc flow ``alpha * A / w_tot + (1 - alpha) * diag(p) T``.

    The walk-mass of dangling nodes is spent through the teleportation
    distribution ``A / w_tot`` so that the entries sum to one.
    """
    A = graph.adjacency()
    T = transition_matrix(graph)
    dangling = graph.out_strength() == 0
    teleport = alpha + (1 - alpha) * p[dangling].sum()
    F = (teleport / graph.w_tot) * A + (1 - alpha) * (sp.diags(p) @ T)
    return F.tocsr()


@dataclass(frozen=True, eq=False)
class FlowModel:
    p: np.ndarray
    T: sp.csr_matrix
    F: sp.csr_matrix
    alpha: float
    directed: bool
    iterations: int = 0
    converged: bool = True

    @property
    def n(self) -> int:
        return len(self.p)

    def node_entropy(self) -> float:
        """Codelength of the one-module partition, ``H(p)`` in bits."""
        nz = self.p[self.p > 0]
        return float(-(nz * np.log2(nz)).sum())


def build_flow(
    graph: Graph,
    alpha: float = DEFAULT_ALPHA,
    force_power_iteration: bool = False,
    tol: float = 1e-12,
    max_iter: int = 10_000,
) -> FlowModel:
    if graph.directed or force_power_iteration:
        rates = visit_rates_power_iteration(graph, alpha, tol, max_iter)
        p, iterations, converged = rates.p, rates.iterations, rates.converged
    else:
        p, iterations, converged = visit_rates_closed_form(graph), 0, True
    return FlowModel(
        p=p,
        T=transition_matrix(graph),
        F=flow_matrix(graph, p, alpha),
        alpha=alpha,
        directed=graph.directed,
        iterations=iterations,
        converged=converged,
    )
