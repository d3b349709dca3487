"""Dense feed-forward networks over flat parameter vectors.

Parameters for a network live in one flat float64 array, layer by layer,
each layer contributing its weight matrix (``outputs x inputs``, row-major)
followed by its bias vector.  Every function here also accepts *stacked*
parameters of shape ``(S, P)`` together with inputs of shape ``(S, B, d)``,
which evaluates ``S`` independent networks of the same topology at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.special import expit

ACTIVATIONS = ("sigmoid", "tanh", "identity")


class ShapeError(ValueError):
    """Raised when an input, upstream gradient or parameter vector has the wrong size."""


@dataclass(frozen=True)
class LayerSpec:
    inputs: int
    outputs: int
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.inputs < 1 or self.outputs < 1:
            raise ValueError(f"layer dimensions must be positive, got {self.inputs}->{self.outputs}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self) -> int:
        return (self.inputs + 1) * self.outputs


@dataclass(frozen=True)
class MlpSpec:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValueError("an MlpSpec needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.outputs != nxt.inputs:
                raise ValueError(
                    f"layer widths do not chain: {prev.outputs} outputs feed {nxt.inputs} inputs"
                )

    @classmethod
    def from_widths(
        cls,
        widths: Sequence[int],
        activation: str = "sigmoid",
        output_activation: str | None = None,
    ) -> "MlpSpec":
        """Build a spec from ``[n_in, h1, ..., n_out]``."""
        if len(widths) < 2:
            raise ValueError("need at least an input and an output width")
        out_act = activation if output_activation is None else output_activation
        n = len(widths) - 1
        return cls(
            tuple(
                LayerSpec(widths[i], widths[i + 1], out_act if i == n - 1 else activation)
                for i in range(n)
            )
        )

    @property
    def n_inputs(self) -> int:
        return self.layers[0].inputs

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].outputs

    @property
    def widths(self) -> list[int]:
        return [self.layers[0].inputs] + [layer.outputs for layer in self.layers]

    @cached_property
    def layout(self) -> tuple[tuple[int, int, int, int, int], ...]:
        """Per layer ``(w_start, w_stop, b_stop, outputs, inputs)`` offsets into a ParamVector."""
        pos = 0
        out = []
        for layer in self.layers:
            nw = layer.inputs * layer.outputs
            out.append((pos, pos + nw, pos + nw + layer.outputs, layer.outputs, layer.inputs))
            pos += layer.n_params
        return tuple(out)

    @cached_property
    def n_params(self) -> int:
        return sum(layer.n_params for layer in self.layers)

    def to_dict(self) -> dict:
        return {"layers": [[l.inputs, l.outputs, l.activation] for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(tuple(LayerSpec(int(i), int(o), str(a)) for i, o, a in d["layers"]))


def param_count(spec: MlpSpec) -> int:
    return spec.n_params


def unpack(spec: MlpSpec, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Return ``(W, b)`` views per layer; ``W`` has shape ``(..., outputs, inputs)``."""
    params = np.asarray(params, dtype=float)
    if params.shape[-1] != spec.n_params:
        raise ShapeError(
            f"parameter vector has length {params.shape[-1]}, spec needs {spec.n_params}"
        )
    lead = params.shape[:-1]
    return [
        (params[..., w0:w1].reshape(lead + (n_out, n_in)), params[..., w1:b1])
        for w0, w1, b1, n_out, n_in in spec.layout
    ]


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "sigmoid":
        return expit(z)
    if kind == "tanh":
        return np.tanh(z)
    return z


def _activation_slope(a: np.ndarray, kind: str) -> np.ndarray | float:
    # derivative expressed through the layer's output
    if kind == "sigmoid":
        return a * (1.0 - a)
    if kind == "tanh":
        return 1.0 - a * a
    return 1.0


def _as_batch(spec: MlpSpec, params: np.ndarray, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (spec.n_inputs,):
        raise ShapeError(f"input has trailing dimension {x.shape[-1:]}, expected {spec.n_inputs}")
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim - 2 != np.ndim(params) - 1:
        raise ShapeError("stacked parameters need inputs of shape (S, B, d)")
    return x, single


def forward(spec: MlpSpec, params: np.ndarray, x) -> list[np.ndarray]:
    """Activations of every layer, input first and network output last.

    ``x`` may be a single vector, a batch ``(B, d)``, or ``(S, B, d)`` for
    stacked parameters.  A single vector gives one-dimensional activations.
    """
    xb, single = _as_batch(spec, params, x)
    acts = [xb]
    a = xb
    for layer, (W, b) in zip(spec.layers, unpack(spec, params)):
        z = a @ W.swapaxes(-1, -2)
        z += b[..., None, :]
        a = _activate(z, layer.activation)
        acts.append(a)
    if single:
        acts = [v[0] for v in acts]
    return acts


def backward(
    spec: MlpSpec,
    params: np.ndarray,
    x,
    upstream,
    activations: list[np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of ``sum(upstream * output)`` w.r.t. parameters and inputs.

    The parameter gradient is summed over the batch axis, so it has the same
    shape as ``params``.  ``activations`` may be passed to reuse a forward pass.
    """
    params = np.asarray(params, dtype=float)
    xb, single = _as_batch(spec, params, x)
    delta = np.asarray(upstream, dtype=float)
    if single:
        delta = delta[None, :]
    if delta.shape[-1] != spec.n_outputs or delta.shape[:-1] != xb.shape[:-1]:
        raise ShapeError(
            f"upstream gradient shape {np.shape(upstream)} does not match network output"
        )
    if activations is None:
        acts = forward(spec, params, xb)
    else:
        acts = [a[None, :] if single else a for a in activations]

    grad = np.empty_like(params)
    views = unpack(spec, params)
    for idx in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[idx]
        W, _ = views[idx]
        w0, w1, b1, _, _ = spec.layout[idx]
        delta = delta * _activation_slope(acts[idx + 1], layer.activation)
        a_prev = acts[idx]
        gW = delta.swapaxes(-1, -2) @ a_prev
        grad[..., w0:w1] = gW.reshape(gW.shape[:-2] + (-1,))
        grad[..., w1:b1] = delta.sum(axis=-2)
        delta = delta @ W
    if single:
        delta = delta[0]
    return grad, delta


def init_params(spec: MlpSpec, seed: int, scale: float = 0.5) -> np.ndarray:
    """I.i.d. uniform ``[-scale, scale]`` values from a generator seeded by ``seed``."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=param_count(spec))
