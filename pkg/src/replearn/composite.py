"""A shared trunk network ``f`` feeding ``n`` head networks ``g_1 .. g_n``.

The training objective is the average over heads of each head's
mean-squared error on its own row of the sample.  Head ``i`` therefore
receives ``1/n`` of its single-task gradient, and the trunk receives the
average of the single-task trunk gradients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .environment import NMSample
from .nnet import MlpSpec, ShapeError, backward, forward, init_params, param_count


@dataclass(frozen=True)
class CompositeSpec:
    trunk: MlpSpec
    head: MlpSpec
    n_heads: int = 1

    def __post_init__(self):
        if self.n_heads < 1:
            raise ValueError("n_heads must be positive")
        if self.trunk.n_outputs != self.head.n_inputs:
            raise ValueError(
                f"trunk emits {self.trunk.n_outputs} features but heads take {self.head.n_inputs}"
            )

    @property
    def trunk_size(self) -> int:
        return param_count(self.trunk)

    @property
    def head_size(self) -> int:
        return param_count(self.head)

    @property
    def n_params(self) -> int:
        return self.trunk_size + self.n_heads * self.head_size

    def with_heads(self, n: int) -> "CompositeSpec":
        return CompositeSpec(self.trunk, self.head, n)

    def to_dict(self) -> dict:
        return {"trunk": self.trunk.to_dict(), "head": self.head.to_dict(), "n_heads": self.n_heads}

    @classmethod
    def from_dict(cls, d: dict) -> "CompositeSpec":
        return cls(MlpSpec.from_dict(d["trunk"]), MlpSpec.from_dict(d["head"]), int(d["n_heads"]))


@dataclass
class CompositeParams:
    trunk: np.ndarray
    heads: np.ndarray  # (n_heads, head_size); row i is the ParamVector of head i

    def __post_init__(self):
        self.trunk = np.asarray(self.trunk, dtype=float)
        self.heads = np.atleast_2d(np.asarray(self.heads, dtype=float))

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.trunk, self.heads.ravel()])

    @classmethod
    def from_flat(cls, spec: CompositeSpec, flat: np.ndarray) -> "CompositeParams":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (spec.n_params,):
            raise ShapeError(f"flat vector has shape {flat.shape}, expected ({spec.n_params},)")
        t = spec.trunk_size
        return cls(flat[:t].copy(), flat[t:].reshape(spec.n_heads, spec.head_size).copy())

    def check(self, spec: CompositeSpec) -> None:
        if self.trunk.shape != (spec.trunk_size,) or self.heads.shape != (spec.n_heads, spec.head_size):
            raise ShapeError(
                f"parameters {self.trunk.shape}/{self.heads.shape} do not match spec "
                f"({spec.trunk_size},)/({spec.n_heads}, {spec.head_size})"
            )


def init_composite(spec: CompositeSpec, seed: int, scale: float = 0.5) -> CompositeParams:
    seeds = np.random.SeedSequence(seed).generate_state(spec.n_heads + 1)
    trunk = init_params(spec.trunk, int(seeds[0]), scale)
    heads = np.stack([init_params(spec.head, int(s), scale) for s in seeds[1:]])
    return CompositeParams(trunk, heads)


def predict(spec: CompositeSpec, params: CompositeParams, task: int, x) -> float:
    if not 0 <= task < spec.n_heads:
        raise IndexError(f"task index {task} out of range for {spec.n_heads} heads")
    v = forward(spec.trunk, params.trunk, x)[-1]
    return float(forward(spec.head, params.heads[task], v)[-1][0])


def predict_all(spec: CompositeSpec, params: CompositeParams, X: np.ndarray) -> np.ndarray:
    """Output of every head on every input of ``X``; shape ``(n_heads, len(X))``."""
    V = forward(spec.trunk, params.trunk, X)[-1]
    Vs = np.broadcast_to(V, (spec.n_heads,) + V.shape)
    return forward(spec.head, params.heads, Vs)[-1][..., 0]


def _check_sample(spec: CompositeSpec, sample: NMSample) -> None:
    if sample.n != spec.n_heads:
        raise ShapeError(f"sample has {sample.n} rows but the network has {spec.n_heads} heads")


def _loss_from_rows(spec, trunk, heads, X, y):
    n, m, d = X.shape
    V = forward(spec.trunk, trunk, X.reshape(n * m, d))[-1]
    r = (forward(spec.head, heads, V.reshape(n, m, -1))[-1][..., 0] - y).ravel()
    return float(r @ r) / r.size


def _loss_grad_from_rows(spec, trunk, heads, X, y):
    n, m, d = X.shape
    Xf = X.reshape(n * m, d)
    t_acts = forward(spec.trunk, trunk, Xf)
    V = t_acts[-1].reshape(n, m, -1)
    h_acts = forward(spec.head, heads, V)
    resid = h_acts[-1][..., 0] - y
    loss = float(np.mean(resid**2))
    upstream = (2.0 / (n * m)) * resid[..., None]
    g_heads, dV = backward(spec.head, heads, V, upstream, h_acts)
    g_trunk, _ = backward(spec.trunk, trunk, Xf, dV.reshape(n * m, -1), t_acts)
    return loss, g_trunk, g_heads


def empirical_loss(spec: CompositeSpec, params: CompositeParams, sample: NMSample) -> float:
    """``(1/n) sum_i (1/m) sum_j (g_i(f(x_ij)) - y_ij)^2``."""
    _check_sample(spec, sample)
    return _loss_from_rows(spec, params.trunk, params.heads, sample.inputs, sample.labels)


def loss_and_gradient(
    spec: CompositeSpec, params: CompositeParams, sample: NMSample
) -> tuple[float, CompositeParams]:
    _check_sample(spec, sample)
    loss, gt, gh = _loss_grad_from_rows(spec, params.trunk, params.heads, sample.inputs, sample.labels)
    return loss, CompositeParams(gt, gh)


def gradient(spec: CompositeSpec, params: CompositeParams, sample: NMSample) -> CompositeParams:
    return loss_and_gradient(spec, params, sample)[1]


def per_task_loss(
    spec: CompositeSpec,
    params: CompositeParams,
    task: int,
    row: Sequence[tuple[np.ndarray, float]],
) -> float:
    """Mean-squared error of head ``task`` on ``row``, a sequence of ``(x, y)`` pairs."""
    if not 0 <= task < spec.n_heads:
        raise IndexError(f"task index {task} out of range for {spec.n_heads} heads")
    if len(row) == 0:
        raise ValueError("per-task loss needs at least one example")
    X = np.array([np.asarray(x, dtype=float) for x, _ in row])
    y = np.array([float(t) for _, t in row])
    V = forward(spec.trunk, params.trunk, X)[-1]
    out = forward(spec.head, params.heads[task], V)[-1][:, 0]
    return float(np.mean((out - y) ** 2))


def joint_objective(
    spec: CompositeSpec, sample: NMSample
) -> tuple[Callable[[np.ndarray], float], Callable[[np.ndarray], np.ndarray]]:
    """Loss and gradient over the flat (trunk, heads...) vector."""
    _check_sample(spec, sample)
    X, y = sample.inputs, sample.labels
    t = spec.trunk_size
    shape = (spec.n_heads, spec.head_size)

    def loss(w):
        return _loss_from_rows(spec, w[:t], w[t:].reshape(shape), X, y)

    def grad(w):
        _, gt, gh = _loss_grad_from_rows(spec, w[:t], w[t:].reshape(shape), X, y)
        return np.concatenate([gt, gh.ravel()])

    return loss, grad


def head_objective(
    head: MlpSpec, V: np.ndarray, y: np.ndarray
) -> tuple[Callable[[np.ndarray], float], Callable[[np.ndarray], np.ndarray]]:
    """Loss and gradient of a single head on fixed features ``V``."""
    V = np.asarray(V, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = 2.0 / len(y)

    def loss(w):
        r = forward(head, w, V)[-1][:, 0] - y
        # np.sum rather than a dot product: it reduces a 1-D residual exactly
        # like each row of a stacked one, so batched head fits stay bit-identical
        return float(np.sum(r * r)) / r.size

    def grad(w):
        acts = forward(head, w, V)
        resid = acts[-1][:, 0] - y
        g, _ = backward(head, w, V, scale * resid[:, None], acts)
        return g

    return loss, grad
