"""Gradient-descent clustering: Adam on encoder parameters against the soft
map equation, with patience-based early stopping."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .flow import DEFAULT_ALPHA, FlowModel, build_flow
from .graph import FeatureMatrix, Graph, Partition
from .mapequation import DEFAULT_EPS, soft_map_equation
from .neural import EncoderConfig, forward, init_params, normalize_adjacency, soft_assignments

log = logging.getLogger(__name__)

DEFAULT_LR = {"linear": 1e-1, "mlp": 1e-2, "gcn": 1e-3, "gin": 1e-3, "sage": 1e-3}


@dataclass(frozen=True)
class TrainConfig:
    lr: float | None = None  # None: per-architecture default
    max_epochs: int = 10_000
    patience: int = 100
    seed: int = 0
    epsilon_loss: float = 1e-6
    trials: int = 1
    eps: float = DEFAULT_EPS
    alpha: float = DEFAULT_ALPHA
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr is not None and self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def learning_rate(self, arch: str) -> float:
        return self.lr if self.lr is not None else DEFAULT_LR[arch]


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(a) for k, a in params.items()}, {k: np.zeros_like(a) for k, a in params.items()})


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new parameters and state."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r} at step {state.step + 1}")
    t = state.step + 1
    new_params, m, v = {}, {}, {}
    for name, x in params.items():
        g = grads[name]
        m[name] = beta1 * state.m[name] + (1 - beta1) * g
        v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = m[name] / (1 - beta1**t)
        v_hat = v[name] / (1 - beta2**t)
        new_params[name] = x - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m, v, t)


def hard_partition(S: np.ndarray) -> Partition:
    """Assign every node to its strongest column (lowest index on ties) and
    renumber the used columns in increasing order."""
    best = np.argmax(S, axis=1)
    _, dense = np.unique(best, return_inverse=True)
    return Partition(dense.reshape(-1))


@dataclass
class TrainedResult:
    best_params: dict[str, np.ndarray]
    best_loss_bits: float
    loss_history: list[float]
    best_S: np.ndarray
    epochs_run: int
    best_epoch: int
    seed: int
    temperature: float = 1.0
    extras: dict = field(default_factory=dict)

    @property
    def partition(self) -> Partition:
        return hard_partition(self.best_S)


def _prepare_features(X) -> np.ndarray | sp.csr_matrix:
    values = X.values if isinstance(X, FeatureMatrix) else X
    if sp.issparse(values):
        return values.tocsr()
    values = np.asarray(values, dtype=np.float64)
    # identity-style features are mostly zero; the sparse product is cheaper
    if values.size > 2500 and np.count_nonzero(values) < 0.25 * values.size:
        return sp.csr_matrix(values)
    return values


def _loss(params, op, X, enc, F, eps, train_mode, rng, requires_grad):
    tape = ad.Tape()
    logits, leaves = forward(params, op, X, enc, tape, train_mode=train_mode, rng=rng, requires_grad=requires_grad)
    S = soft_assignments(logits, leaves["log_temperature"])
    loss = soft_map_equation(F, S, eps)["loss"]
    return tape, loss, S, leaves


def train(
    graph: Graph,
    X,
    enc: EncoderConfig,
    cfg: TrainConfig,
    flow: FlowModel | None = None,
) -> TrainedResult:
    """Full-batch training of one encoder.

    Each epoch first evaluates the current parameters without dropout; that
    loss feeds the history, best-solution tracking and the patience counter.
    Then a dropout pass produces the gradient for one Adam step. Reported
    losses include the constant node term, so they are full codelengths.
    """
    enc = enc.resolve(graph.n)
    flow = flow or build_flow(graph, cfg.alpha)
    F = flow.F
    node_term = flow.node_entropy()
    op = normalize_adjacency(graph, enc.arch)
    X = _prepare_features(X)
    lr = cfg.learning_rate(enc.arch)
    params = init_params(enc, X.shape[1], cfg.seed)
    state = AdamState.zeros(params)
    drop_rng = np.random.default_rng([cfg.seed, 1])
    stochastic = enc.arch != "linear" and enc.dropout_p > 0

    history: list[float] = []
    best = np.inf
    best_params, best_S, best_epoch = params, None, 0
    stale = 0
    epoch = 0
    for epoch in range(cfg.max_epochs):
        tape, loss, S, leaves = _loss(params, op, X, enc, F, cfg.eps, False, None, not stochastic)
        bits = loss.item() + node_term
        history.append(bits)
        if bits < best - cfg.epsilon_loss:
            stale = 0
        else:
            stale += 1
        if bits < best:
            best, best_params, best_S, best_epoch = bits, params, S.value, epoch
        if stale >= cfg.patience:
            break
        if stochastic:
            tape, loss, S, leaves = _loss(params, op, X, enc, F, cfg.eps, True, drop_rng, True)
        grads = tape.backward(loss)
        params, state = adam_step(
            params,
            {k: grads[t.id] for k, t in leaves.items()},
            state,
            lr,
            cfg.beta1,
            cfg.beta2,
            cfg.adam_eps,
        )
    return TrainedResult(
        best_params=best_params,
        best_loss_bits=best,
        loss_history=history,
        best_S=best_S,
        epochs_run=len(history),
        best_epoch=best_epoch,
        seed=cfg.seed,
        temperature=float(np.exp(best_params["log_temperature"][0, 0])),
    )


def _train_one(args):
    graph, X, enc, cfg, flow = args
    return train(graph, X, enc, cfg, flow)


def train_trials(
    graph: Graph,
    X,
    enc: EncoderConfig,
    cfg: TrainConfig,
    workers: int = 1,
) -> tuple[TrainedResult, list[TrainedResult]]:
    """Run ``cfg.trials`` independent seeds ``cfg.seed, cfg.seed + 1, ...``.

    Returns the lowest-loss result (earliest seed on ties) and all results in
    seed order.
    """

    flow = build_flow(graph, cfg.alpha)
    jobs = [(graph, X, enc, replace(cfg, seed=cfg.seed + t), flow) for t in range(cfg.trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_train_one, jobs))
    else:
        results = [_train_one(j) for j in jobs]
    best = min(results, key=lambda r: r.best_loss_bits)
    return best, results
