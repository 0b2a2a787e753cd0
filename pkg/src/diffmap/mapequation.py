"""Map equation codelengths for hard partitions and soft assignments.

All rates come from the flow matrix ``F`` of a :class:`FlowModel`: the flow
from module ``a`` to module ``b`` is the total ``F`` mass on arcs leaving a
node of ``a`` for a node of ``b``. Hard evaluators treat ``0 log 0`` as zero
exactly; the soft evaluator smooths every logarithm with ``eps``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .flow import FlowModel
from .graph import Partition

DEFAULT_EPS = 1e-8
ROW_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Codelength:
    """Codelength in bits and the rates it was computed from.

    ``index`` is the entry-codebook term ``q H(Q)`` and ``module`` the sum of
    module codebook terms; ``node_term`` is the partition-independent
    ``-sum p log2 p`` that is already part of ``module``.
    """

    total: float
    index: float
    module: float
    q: float
    q_m: np.ndarray
    m_exit: np.ndarray
    p_m: np.ndarray
    node_term: float
    per_module: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "index": self.index,
            "module": self.module,
            "node_term": self.node_term,
            "q": self.q,
            "per_module": [
                {"q_m": float(a), "m_exit": float(b), "p_m": float(c), "bits": float(d)}
                for a, b, c, d in zip(self.q_m, self.m_exit, self.p_m, self.per_module)
            ],
        }


def plogp(x) -> np.ndarray:
    """Elementwise ``x log2 x`` with ``0 log 0 = 0``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log2(x[pos])
    return out


def _check_partition(flow: FlowModel, part: Partition):
    if part.n != flow.n:
        raise ValueError(f"partition covers {part.n} nodes, flow has {flow.n}")


def module_flow(F: sp.spmatrix, labels: np.ndarray, k: int) -> np.ndarray:
    """k x k matrix of flow between modules."""
    coo = F.tocoo()
    M = np.zeros((k, k))
    np.add.at(M, (labels[coo.row], labels[coo.col]), coo.data)
    return M


def _hard_rates(flow: FlowModel, part: Partition):
    k = part.module_count
    M = module_flow(flow.F, part.labels, k)
    inside = np.diag(M)
    q_m = M.sum(axis=0) - inside
    m_exit = M.sum(axis=1) - inside
    p_in = np.bincount(part.labels, weights=flow.p, minlength=k)
    p_m = m_exit + p_in
    return q_m, m_exit, p_m


def codelength_entropy_form(flow: FlowModel, part: Partition) -> Codelength:
    """Codelength as entropy of the index codebook plus module codebooks."""
    _check_partition(flow, part)
    q_m, m_exit, p_m = _hard_rates(flow, part)
    q = float(q_m.sum())
    index = 0.0
    if q > 0:
        nz = q_m[q_m > 0]
        index = float(-(nz * np.log2(nz / q)).sum())

    per_module = np.zeros(part.module_count)
    for m in range(part.module_count):
        if p_m[m] <= 0:
            continue
        rates = np.append(flow.p[part.labels == m], m_exit[m])
        rates = rates[rates > 0]
        per_module[m] = -(rates * np.log2(rates / p_m[m])).sum()
    module = float(per_module.sum())
    return Codelength(
        total=index + module,
        index=index,
        module=module,
        q=q,
        q_m=q_m,
        m_exit=m_exit,
        p_m=p_m,
        node_term=flow.node_entropy(),
        per_module=per_module,
    )


def _expanded(flow: FlowModel, part: Partition, q_m, m_exit, p_m, undirected: bool) -> Codelength:
    q = float(q_m.sum())
    node_term = flow.node_entropy()
    index = float(plogp(q) - plogp(q_m).sum())
    if undirected:
        # entry == exit, so the exit sum folds into a doubled entry sum
        total = float(plogp(q) - 2 * plogp(q_m).sum() + plogp(p_m).sum()) + node_term
    else:
        total = float(plogp(q) - plogp(q_m).sum() - plogp(m_exit).sum() + plogp(p_m).sum()) + node_term
    node_plogp = np.bincount(part.labels, weights=plogp(flow.p), minlength=part.module_count)
    return Codelength(
        total=total,
        index=index,
        module=total - index,
        q=q,
        q_m=q_m,
        m_exit=m_exit,
        p_m=p_m,
        node_term=node_term,
        per_module=plogp(p_m) - plogp(m_exit) - node_plogp,
    )


def codelength_expanded_form(flow: FlowModel, part: Partition, fast_path: bool = True) -> Codelength:
    """Codelength from the five ``x log2 x`` sums.

    For undirected flow (module entry equals exit) the shorter form with a
    doubled entry term is used unless ``fast_path`` is false.
    """
    _check_partition(flow, part)
    q_m, m_exit, p_m = _hard_rates(flow, part)
    undirected = fast_path and not flow.directed and np.allclose(q_m, m_exit, rtol=0, atol=1e-15)
    return _expanded(flow, part, q_m, m_exit, p_m, undirected)


def codelength_undirected(flow: FlowModel, part: Partition) -> Codelength:
    """Codelength using the undirected simplification; requires entry == exit."""
    _check_partition(flow, part)
    q_m, m_exit, p_m = _hard_rates(flow, part)
    if not np.allclose(q_m, m_exit, rtol=0, atol=1e-13):
        raise ValueError("module entry and exit rates differ; flow is not undirected")
    return _expanded(flow, part, q_m, m_exit, p_m, True)


# -- soft assignments -----------------------------------------------------------


def check_soft_assignment(S: np.ndarray, n: int | None = None, tol: float = ROW_TOL):
    if S.ndim != 2:
        raise ValueError("soft assignment must be an n x s matrix")
    if n is not None and S.shape[0] != n:
        raise ValueError(f"soft assignment has {S.shape[0]} rows, flow has {n} nodes")
    if S.min() < -tol or S.max() > 1 + tol:
        raise ValueError("soft assignment entries must lie in [0, 1]")
    dev = np.abs(S.sum(axis=1) - 1).max()
    if dev > tol:
        raise ValueError(f"soft assignment rows must sum to 1 (max deviation {dev:.3g})")


def soft_map_equation(F: sp.spmatrix, S: ad.Tensor, eps: float = DEFAULT_EPS) -> dict[str, ad.Tensor]:
    """Record the differentiable map equation for soft assignments ``S``.

    Returns the intermediate tensors; ``"loss"`` is the codelength without the
    constant node term. With ``C = S^T F S``, row sums of ``C`` are flow
    leaving a module and column sums flow arriving in it.
    """
    tape = S.tape
    C = ad.matmul(ad.transpose(S), ad.sparse_dense_matmul(F, S))
    inside = ad.diag_extract(C)
    q = ad.sub(tape.constant(1.0), ad.trace(C))
    inflow = ad.transpose(ad.col_sum(C))
    m_exit = ad.sub(ad.row_sum(C), inside)
    q_m = ad.sub(inflow, inside)
    p_m = ad.add(m_exit, inflow)
    loss = ad.sub(
        ad.add(ad.xlogx_eps(q, eps), ad.sum_all(ad.xlogx_eps(p_m, eps))),
        ad.add(ad.sum_all(ad.xlogx_eps(q_m, eps)), ad.sum_all(ad.xlogx_eps(m_exit, eps))),
    )
    return {"C": C, "q": q, "q_m": q_m, "m_exit": m_exit, "p_m": p_m, "loss": loss}


def codelength_soft(F: sp.spmatrix, p: np.ndarray, S: np.ndarray, eps: float = DEFAULT_EPS) -> Codelength:
    """Evaluate the smoothed soft map equation, node term included."""
    S = np.asarray(S, dtype=np.float64)
    check_soft_assignment(S, len(p))
    terms = soft_map_equation(F, ad.Tape().constant(S), eps)
    q = terms["q"].item()
    q_m = terms["q_m"].value[:, 0]
    m_exit = terms["m_exit"].value[:, 0]
    p_m = terms["p_m"].value[:, 0]
    nz = p[p > 0]
    node_term = float(-(nz * np.log2(nz)).sum())
    xl = lambda x: x * np.log2(x + eps)  # noqa: E731
    index = float(xl(q) - xl(q_m).sum())
    module = terms["loss"].item() - index + node_term
    return Codelength(
        total=index + module,
        index=index,
        module=module,
        q=q,
        q_m=q_m,
        m_exit=m_exit,
        p_m=p_m,
        node_term=node_term,
        per_module=xl(p_m) - xl(q_m) - xl(m_exit),
    )


def soft_node_term(p: np.ndarray, S: np.ndarray, p_m: np.ndarray, mode: str = "indivisible") -> float:
    """Bits spent on node visits when nodes belong to several modules.

    ``split`` codes each fraction ``s_ui p_u`` as its own object inside module
    ``i``; ``indivisible`` keeps the node whole (codeword length from ``p_u``)
    but charges only the fraction ``s_ui p_u`` of its visits to module ``i``.
    """
    flow = S * p[:, None]
    if mode == "split":
        inner = flow
    elif mode == "indivisible":
        inner = np.broadcast_to(p[:, None], S.shape)
    else:
        raise ValueError(f"unknown node-flow mode {mode!r}")
    used = flow > 0
    ratio = inner[used] / np.broadcast_to(p_m[None, :], S.shape)[used]
    return float(-(flow[used] * np.log2(ratio)).sum())


def codelength_soft_nodes(F: sp.spmatrix, p: np.ndarray, S: np.ndarray, mode: str) -> float:
    """Soft codelength with exact logarithms and the given node-flow accounting.

    The module-level part charges index entries, module exits and exit
    codewords; node visits are costed by :func:`soft_node_term`. One-hot
    ``S`` reproduces the hard codelength in either mode.
    """
    S = np.asarray(S, dtype=np.float64)
    check_soft_assignment(S, len(p))
    C = S.T @ np.asarray(F @ S)
    inside = np.diag(C)
    inflow = C.sum(axis=0)
    m_exit = C.sum(axis=1) - inside
    q_m = inflow - inside
    p_m = m_exit + inflow
    q = 1.0 - inside.sum()
    exit_words = np.where(m_exit > 0, m_exit * np.log2(np.where(p_m > 0, p_m, 1.0)), 0.0).sum()
    modules = plogp(q) - plogp(q_m).sum() - plogp(m_exit).sum() + exit_words
    return float(modules + soft_node_term(p, S, p_m, mode))


# -- exhaustive search ---------------------------------------------------------


def restricted_growth_strings(n: int) -> Iterator[np.ndarray]:
    """All set partitions of ``n`` items as restricted growth strings, in
    lexicographic order."""
    if n == 0:
        return
    a = [0] * n
    b = [0] * n  # b[i] = max(a[:i]) + 1 for i >= 1
    b[0] = 1
    for i in range(1, n):
        b[i] = 1
    while True:
        yield np.array(a)
        i = n - 1
        while i > 0 and a[i] == b[i]:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        for j in range(i + 1, n):
            a[j] = 0
            b[j] = max(b[j - 1], a[j - 1] + 1)


def brute_force_optimum(flow: FlowModel, max_n: int = 10, tie_tol: float = 1e-12) -> tuple[Partition, Codelength]:
    """Minimum-codelength partition by exhaustive enumeration.

    Ties within ``tie_tol`` go to fewer modules, then to the lexicographically
    smallest label string.
    """
    n = flow.n
    if n > max_n:
        raise ValueError(f"brute force limited to {max_n} nodes, graph has {n}")
    coo = flow.F.tocoo()
    rows, cols, vals = coo.row, coo.col, coo.data
    h_nodes = float(plogp(flow.p).sum())
    best_labels, best_bits, best_k = None, np.inf, 0
    for labels in restricted_growth_strings(n):
        k = int(labels.max()) + 1
        M = np.zeros((k, k))
        np.add.at(M, (labels[rows], labels[cols]), vals)
        inside = np.diag(M)
        q_m = M.sum(axis=0) - inside
        m_exit = M.sum(axis=1) - inside
        p_m = m_exit + np.bincount(labels, weights=flow.p, minlength=k)
        bits = float(
            plogp(q_m.sum()) - plogp(q_m).sum() - plogp(m_exit).sum() - h_nodes + plogp(p_m).sum()
        )
        if bits < best_bits - tie_tol or (abs(bits - best_bits) <= tie_tol and k < best_k):
            best_labels, best_bits, best_k = labels, bits, k
    part = Partition(best_labels)
    return part, codelength_expanded_form(flow, part)
