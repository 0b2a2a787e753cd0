"""Encoders that map (A, X) to cluster logits, and the temperature softmax.

Architectures: ``linear`` (one affine map), ``mlp``, ``gcn``, ``gin`` and
``sage``, the last four with two layers. A hidden layer is
affine -> batch norm -> SELU -> dropout. Messages flow along arcs, so a node
aggregates over its in-neighbours.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .graph import Graph

ARCHITECTURES = ("linear", "mlp", "gcn", "gin", "sage")
CHECKPOINT_FORMAT = "diffmap-params"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EncoderConfig:
    """Encoder shape. ``hidden_dim`` and ``s`` default to ``ceil(4 sqrt n)``
    and ``ceil(sqrt n)``; call :meth:`resolve` to fill them in."""

    arch: str = "mlp"
    hidden_dim: int | None = None
    s: int | None = None
    dropout_p: float = 0.5
    use_batch_norm: bool = True
    temperature_init: float = 1.0

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}, expected one of {ARCHITECTURES}")
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.s is not None and self.s < 1:
            raise ValueError("s must be >= 1")
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout_p must lie in [0, 1)")
        if self.temperature_init <= 0:
            raise ValueError("temperature_init must be positive")

    def resolve(self, n: int) -> "EncoderConfig":
        return replace(
            self,
            hidden_dim=self.hidden_dim or math.ceil(4 * math.sqrt(n)),
            s=self.s or math.ceil(math.sqrt(n)),
        )


@dataclass(frozen=True, eq=False)
class MessageOperator:
    arch: str
    matrix: sp.csr_matrix | None


def normalize_adjacency(graph: Graph, arch: str) -> MessageOperator:
    """Propagation matrix for ``arch``; row ``v`` gathers from arcs ``u -> v``.

    gcn: symmetric-normalised ``A + I``; sage: weighted mean over in-neighbours
    (the self term has its own weights); gin: ``A + I`` (self weight fixed at 1).
    """
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}")
    if arch in ("linear", "mlp"):
        return MessageOperator(arch, None)
    At = graph.adjacency().T.tocsr()
    eye = sp.identity(graph.n, format="csr")
    if arch == "gcn":
        At = At + eye
        d = np.asarray(At.sum(axis=1)).ravel()
        dinv = sp.diags(1.0 / np.sqrt(d))
        M = dinv @ At @ dinv
    elif arch == "sage":
        d = np.asarray(At.sum(axis=1)).ravel()
        M = sp.diags(np.divide(1.0, d, out=np.zeros_like(d), where=d > 0)) @ At
    else:
        M = At + eye
    return MessageOperator(arch, sp.csr_matrix(M))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(config: EncoderConfig, n_features: int, seed: int) -> dict[str, np.ndarray]:
    """Seeded Glorot-uniform weights, zero biases, unit batch-norm scale."""
    if config.hidden_dim is None or config.s is None:
        raise ValueError("resolve the encoder config before initialising parameters")
    rng = np.random.default_rng(seed)
    d, h, s = n_features, config.hidden_dim, config.s
    params: dict[str, np.ndarray] = {}

    def dense(name, fan_in, fan_out):
        params[f"{name}.W"] = _glorot(rng, fan_in, fan_out)
        params[f"{name}.b"] = np.zeros((1, fan_out))

    def norm(name, width):
        if config.use_batch_norm:
            params[f"{name}.gamma"] = np.ones((1, width))
            params[f"{name}.beta"] = np.zeros((1, width))

    arch = config.arch
    if arch == "linear":
        dense("out", d, s)
    elif arch in ("mlp", "gcn"):
        dense("hidden", d, h)
        norm("bn", h)
        dense("out", h, s)
    elif arch == "sage":
        dense("hidden", d, h)
        params["hidden.W_neigh"] = _glorot(rng, d, h)
        norm("bn", h)
        dense("out", h, s)
        params["out.W_neigh"] = _glorot(rng, h, s)
    elif arch == "gin":
        dense("gin1.inner", d, h)
        dense("gin1.outer", h, h)
        norm("bn", h)
        dense("gin2.inner", h, h)
        dense("gin2.outer", h, s)
    params["log_temperature"] = np.array([[math.log(config.temperature_init)]])
    return params


def _xw(x, W: ad.Tensor) -> ad.Tensor:
    """``x @ W`` where ``x`` is a tensor or a constant sparse matrix."""
    if sp.issparse(x):
        return ad.sparse_dense_matmul(x, W)
    return ad.matmul(x, W)


def _affine(x, p: dict[str, ad.Tensor], name: str) -> ad.Tensor:
    return ad.add_row(_xw(x, p[f"{name}.W"]), p[f"{name}.b"])


def forward(
    params: dict[str, np.ndarray],
    op: MessageOperator,
    X,
    config: EncoderConfig,
    tape: ad.Tape,
    train_mode: bool = False,
    rng: np.random.Generator | None = None,
    requires_grad: bool = True,
) -> tuple[ad.Tensor, dict[str, ad.Tensor]]:
    """Record the encoder on ``tape``; returns logits and the parameter leaves.

    ``X`` is a dense array or a scipy sparse matrix. Dropout is only applied in
    train mode with a generator supplied.
    """
    if op.arch != config.arch:
        raise ValueError(f"operator built for {op.arch!r}, config is {config.arch!r}")
    p = {k: tape.leaf(v, requires_grad=requires_grad, name=k) for k, v in params.items()}
    if not sp.issparse(X):
        X = tape.constant(X)
    M = op.matrix
    if M is not None and X.shape[0] != M.shape[0]:
        raise ValueError(f"features have {X.shape[0]} rows, graph has {M.shape[0]} nodes")

    def hidden(h: ad.Tensor) -> ad.Tensor:
        if config.use_batch_norm:
            h = ad.batch_feature_norm(h, p["bn.gamma"], p["bn.beta"])
        h = ad.selu(h)
        if train_mode and rng is not None and config.dropout_p > 0:
            keep = rng.random(h.shape) >= config.dropout_p
            h = ad.dropout_mask_apply(h, keep / (1.0 - config.dropout_p))
        return h

    arch = config.arch
    if arch == "linear":
        logits = _affine(X, p, "out")
    elif arch == "mlp":
        h = hidden(_affine(X, p, "hidden"))
        logits = _affine(h, p, "out")
    elif arch == "gcn":
        h = ad.add_row(ad.sparse_dense_matmul(M, _xw(X, p["hidden.W"])), p["hidden.b"])
        h = hidden(h)
        logits = ad.add_row(ad.sparse_dense_matmul(M, ad.matmul(h, p["out.W"])), p["out.b"])
    elif arch == "sage":
        neigh = ad.sparse_dense_matmul(M, _xw(X, p["hidden.W_neigh"]))
        h = hidden(ad.add(_affine(X, p, "hidden"), neigh))
        neigh = ad.sparse_dense_matmul(M, ad.matmul(h, p["out.W_neigh"]))
        logits = ad.add(_affine(h, p, "out"), neigh)
    else:  # gin
        agg = ad.sparse_dense_matmul(M, _xw(X, p["gin1.inner.W"]))
        h = _affine(ad.selu(ad.add_row(agg, p["gin1.inner.b"])), p, "gin1.outer")
        h = hidden(h)
        agg = ad.sparse_dense_matmul(M, ad.matmul(h, p["gin2.inner.W"]))
        logits = _affine(ad.selu(ad.add_row(agg, p["gin2.inner.b"])), p, "gin2.outer")
    return logits, p


def soft_assignments(logits: ad.Tensor, log_temperature: ad.Tensor) -> ad.Tensor:
    """Row softmax of ``logits / exp(log_temperature)``."""
    return ad.row_softmax_with_temperature(logits, ad.exp(log_temperature))


def softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    z = logits / temperature
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def save_params(params: dict[str, np.ndarray], config: EncoderConfig, path) -> None:
    """Write a JSON checkpoint: format tag, version, encoder config and
    named arrays stored as ``{"shape": [...], "data": [...]}``."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": {
            "arch": config.arch,
            "hidden_dim": config.hidden_dim,
            "s": config.s,
            "dropout_p": config.dropout_p,
            "use_batch_norm": config.use_batch_norm,
            "temperature_init": config.temperature_init,
        },
        "arrays": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in params.items()},
    }
    Path(path).write_text(json.dumps(doc))


def load_params(path) -> tuple[dict[str, np.ndarray], EncoderConfig]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a parameter checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    params = {k: np.array(a["data"], dtype=np.float64).reshape(a["shape"]) for k, a in doc["arrays"].items()}
    return params, EncoderConfig(**doc["config"])
