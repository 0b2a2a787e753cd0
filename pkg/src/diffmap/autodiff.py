"""Reverse-mode automatic differentiation over dense 2-d arrays.

Every value is a 2-d float64 array; scalars are 1x1. Operations are recorded
on a :class:`Tape` in execution order, and :meth:`Tape.backward` walks that
order in reverse, calling each op's pullback. There is no broadcasting except
where an op says so (``add_row`` adds a 1xd bias to every row).

    tape = Tape()
    W = tape.leaf(np.ones((2, 2)), requires_grad=True)
    loss = sum_all(matmul(W, W))
    grads = tape.backward(loss)
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

LN2 = np.log(2.0)
SELU_ALPHA = 1.6732632423543772
SELU_SCALE = 1.0507009873554805


class Tensor:
    __slots__ = ("value", "requires_grad", "id", "tape", "op", "parents", "pullback", "grad", "name")

    def __init__(self, value, tape: "Tape", requires_grad=False, op="leaf", parents=(), pullback=None, name=None):
        self.value = value
        self.tape = tape
        self.requires_grad = requires_grad
        self.op = op
        self.parents = parents
        self.pullback = pullback
        self.grad = None
        self.name = name
        self.id = -1

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(op={self.op}, id={self.id}, shape={self.shape})"


class Tape:
    """Records operations in order; supports one backward pass per recording."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._consumed = False

    def _add(self, t: Tensor) -> Tensor:
        t.id = len(self.nodes)
        self.nodes.append(t)
        return t

    def leaf(self, value, requires_grad: bool = False, name: str | None = None) -> Tensor:
        value = np.array(value, dtype=np.float64, ndmin=2)
        if value.ndim != 2:
            raise ValueError(f"tensors are 2-d, got shape {value.shape}")
        if not np.all(np.isfinite(value)):
            raise FloatingPointError(f"non-finite value in leaf {name or len(self.nodes)}")
        return self._add(Tensor(value, self, requires_grad, name=name))

    def constant(self, value) -> Tensor:
        return self.leaf(value, requires_grad=False)

    def record(self, op: str, value: np.ndarray, parents: Sequence[Tensor], pullback: Callable) -> Tensor:
        for par in parents:
            if par.tape is not self:
                raise ValueError(f"{op}: input {par.id} belongs to a different tape")
        if not np.all(np.isfinite(value)):
            raise FloatingPointError(f"non-finite output from op #{len(self.nodes)} ({op})")
        needs = any(par.requires_grad for par in parents)
        return self._add(Tensor(value, self, needs, op, tuple(parents), pullback if needs else None))

    def backward(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Accumulate d(loss)/d(node) for every node that requires a gradient.

        Returns a map from node id to gradient array; leaves also get ``.grad``.
        """
        if loss.tape is not self or loss.id < 0 or self.nodes[loss.id] is not loss:
            raise ValueError("loss is not recorded on this tape")
        if loss.shape != (1, 1):
            raise ValueError(f"loss must be 1x1, got {loss.shape}")
        if self._consumed:
            raise RuntimeError("backward already ran on this tape")
        self._consumed = True
        grads: dict[int, np.ndarray] = {loss.id: np.ones((1, 1))}
        for node in reversed(self.nodes[: loss.id + 1]):
            g = grads.get(node.id)
            if g is None or node.pullback is None:
                continue
            contribs = node.pullback(g)
            for par, c in zip(node.parents, contribs):
                if c is None or not par.requires_grad:
                    continue
                if par.id in grads:
                    grads[par.id] = grads[par.id] + c
                else:
                    grads[par.id] = c
        for node in self.nodes:
            if node.op == "leaf" and node.requires_grad:
                node.grad = grads.get(node.id, np.zeros_like(node.value))
                grads[node.id] = node.grad
        return grads


def backward(loss: Tensor) -> dict[int, np.ndarray]:
    return loss.tape.backward(loss)


def _check(op: str, cond: bool, msg: str):
    if not cond:
        raise ValueError(f"{op}: shape mismatch, {msg}")


# -- linear algebra ---------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check("matmul", a.shape[1] == b.shape[0], f"{a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return a.tape.record("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def sparse_dense_matmul(m: sp.spmatrix, b: Tensor) -> Tensor:
    """Constant sparse matrix times a dense tensor."""
    _check("sparse_dense_matmul", m.shape[1] == b.shape[0], f"{m.shape} @ {b.shape}")
    mt = m.T.tocsr()
    return b.tape.record("sparse_dense_matmul", np.asarray(m @ b.value), (b,), lambda g: (np.asarray(mt @ g),))


def transpose(a: Tensor) -> Tensor:
    return a.tape.record("transpose", a.value.T.copy(), (a,), lambda g: (g.T,))


def add(a: Tensor, b: Tensor) -> Tensor:
    _check("add", a.shape == b.shape, f"{a.shape} + {b.shape}")
    return a.tape.record("add", a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check("sub", a.shape == b.shape, f"{a.shape} - {b.shape}")
    return a.tape.record("sub", a.value - b.value, (a, b), lambda g: (g, -g))


def add_row(a: Tensor, row: Tensor) -> Tensor:
    """Add a 1xd row vector to every row of an nxd tensor."""
    _check("add_row", row.shape == (1, a.shape[1]), f"{a.shape} + row {row.shape}")
    return a.tape.record("add_row", a.value + row.value, (a, row), lambda g: (g, g.sum(axis=0, keepdims=True)))


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    _check("elementwise_mul", a.shape == b.shape, f"{a.shape} * {b.shape}")
    av, bv = a.value, b.value
    return a.tape.record("elementwise_mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scalar_mul(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return a.tape.record("scalar_mul", c * a.value, (a,), lambda g: (c * g,))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.value)
    return a.tape.record("exp", out, (a,), lambda g: (g * out,))


# -- reductions -------------------------------------------------------------


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return a.tape.record("sum_all", np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),))


def row_sum(a: Tensor) -> Tensor:
    """n x d -> n x 1."""
    d = a.shape[1]
    return a.tape.record("row_sum", a.value.sum(axis=1, keepdims=True), (a,), lambda g: (np.repeat(g, d, axis=1),))


def col_sum(a: Tensor) -> Tensor:
    """n x d -> 1 x d."""
    n = a.shape[0]
    return a.tape.record("col_sum", a.value.sum(axis=0, keepdims=True), (a,), lambda g: (np.repeat(g, n, axis=0),))


def trace(a: Tensor) -> Tensor:
    _check("trace", a.shape[0] == a.shape[1], f"square input, got {a.shape}")
    n = a.shape[0]
    return a.tape.record("trace", np.array([[np.trace(a.value)]]), (a,), lambda g: (g[0, 0] * np.eye(n),))


def diag_extract(a: Tensor) -> Tensor:
    """Diagonal of a square matrix as an n x 1 column."""
    _check("diag_extract", a.shape[0] == a.shape[1], f"square input, got {a.shape}")
    return a.tape.record("diag_extract", np.diag(a.value).reshape(-1, 1).copy(), (a,), lambda g: (np.diag(g[:, 0]),))


# -- elementwise nonlinearities ---------------------------------------------


def log2_eps(a: Tensor, eps: float) -> Tensor:
    x = a.value + eps
    if np.any(x <= 0):
        raise FloatingPointError("log2_eps: argument must be positive")
    return a.tape.record("log2_eps", np.log2(x), (a,), lambda g: (g / (x * LN2),))


def xlogx_eps(a: Tensor, eps: float) -> Tensor:
    """``x * log2(x + eps)`` elementwise."""
    v = a.value
    x = v + eps
    if np.any(x <= 0):
        raise FloatingPointError("xlogx_eps: argument must be positive")
    lg = np.log2(x)
    return a.tape.record("xlogx_eps", v * lg, (a,), lambda g: (g * (lg + v / (x * LN2)),))


def selu(a: Tensor) -> Tensor:
    v = a.value
    neg = SELU_SCALE * SELU_ALPHA * np.exp(np.minimum(v, 0.0))
    out = np.where(v > 0, SELU_SCALE * v, neg - SELU_SCALE * SELU_ALPHA)
    slope = np.where(v > 0, SELU_SCALE, neg)
    return a.tape.record("selu", out, (a,), lambda g: (g * slope,))


def dropout_mask_apply(a: Tensor, mask: np.ndarray) -> Tensor:
    """Multiply by a pre-sampled mask (already scaled by 1/(1-p))."""
    _check("dropout_mask_apply", mask.shape == a.shape, f"mask {mask.shape} vs {a.shape}")
    return a.tape.record("dropout_mask_apply", a.value * mask, (a,), lambda g: (g * mask,))


def row_softmax_with_temperature(logits: Tensor, temperature: Tensor) -> Tensor:
    """Row-wise softmax of ``logits / temperature``; temperature is 1x1."""
    _check("row_softmax_with_temperature", temperature.shape == (1, 1), f"temperature {temperature.shape}")
    tau = temperature.value[0, 0]
    if tau <= 0:
        raise ValueError("temperature must be positive")
    z = logits.value / tau
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    S = e / e.sum(axis=1, keepdims=True)
    lv = logits.value

    def pullback(g):
        dz = S * (g - (g * S).sum(axis=1, keepdims=True))
        return dz / tau, np.array([[-(dz * lv).sum() / tau**2]])

    return logits.tape.record("row_softmax_with_temperature", S, (logits, temperature), pullback)


def batch_feature_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise every column over all rows, then scale and shift.

    ``gamma`` and ``beta`` are 1xd. The full node set is the batch, so the
    same statistics are used in training and evaluation.
    """
    d = a.shape[1]
    _check("batch_feature_norm", gamma.shape == (1, d) and beta.shape == (1, d), "scale/shift must be 1xd")
    x = a.value
    n = x.shape[0]
    mu = x.mean(axis=0, keepdims=True)
    inv = 1.0 / np.sqrt(x.var(axis=0, keepdims=True) + eps)
    xhat = (x - mu) * inv
    gv = gamma.value

    def pullback(g):
        gx = g * gv
        dx = inv / n * (n * gx - gx.sum(axis=0, keepdims=True) - xhat * (gx * xhat).sum(axis=0, keepdims=True))
        return dx, (g * xhat).sum(axis=0, keepdims=True), g.sum(axis=0, keepdims=True)

    return a.tape.record("batch_feature_norm", gv * xhat + beta.value, (a, gamma, beta), pullback)


# -- checking -----------------------------------------------------------------


def finite_difference_check(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    grad: np.ndarray,
    step: float = 1e-6,
    coords: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-5,
) -> float:
    """Largest relative error between ``grad`` and central differences of ``f``.

    ``coords`` limits the check to that many randomly sampled entries. The
    error of one entry is ``|a - n| / max(|a|, |n|, floor)``; the floor keeps
    round-off in near-zero derivatives from dominating.
    """
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    idx = np.arange(flat.size)
    if coords is not None and coords < flat.size:
        idx = (rng or np.random.default_rng(0)).choice(flat.size, size=coords, replace=False)
    worst = 0.0
    gflat = np.asarray(grad).reshape(-1)
    for i in idx:
        old = flat[i]
        flat[i] = old + step
        up = f(x)
        flat[i] = old - step
        down = f(x)
        flat[i] = old
        num = (up - down) / (2 * step)
        err = abs(gflat[i] - num) / max(abs(gflat[i]), abs(num), floor)
        worst = max(worst, err)
    return worst
