"""Exact error measures on the finite retina environment and the experiment drivers.

Because the environment has only ``R * L`` inputs and ``2^L - 2`` tasks,
"true" errors are computed by enumeration rather than by sampling.
Infima over head networks are estimated by the best of several seeded
restarts, so representation errors reported here are upper estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .bounds import d_nu
from .composite import CompositeParams, CompositeSpec, predict_all
from .environment import Environment, full_table, sample_nm, sample_task_row
from .nnet import MlpSpec, forward, param_count, unpack
from .optimizer import TrainConfig, TrainingAborted, train_composite, train_head_frozen_trunk, train_heads_lockstep

SUCCESS_THRESHOLD = 0.01


@dataclass
class EvalReport:
    per_task_true_error: list[float]
    mean_true_error: float
    success: bool


@dataclass
class SurfacePoint:
    n: int
    m: int
    trial: int
    train_loss: float
    true_error: float
    converged: bool
    params: CompositeParams | None = None
    task_ids: np.ndarray | None = None


@dataclass
class TransferPoint:
    curve: str
    m: int
    mean_true_error: float
    stderr: float


@dataclass
class GapEstimate:
    p_hat: float
    ci_halfwidth: float
    trials: int


def derived_seed(*parts: int) -> int:
    """A stable 32-bit seed determined by ``parts``."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def true_error_tasks(
    spec: CompositeSpec,
    params: CompositeParams,
    env: Environment,
    task_ids: Sequence[int],
    threshold: float = SUCCESS_THRESHOLD,
) -> EvalReport:
    """Mean-squared error of head ``i`` against task ``task_ids[i]`` over every input."""
    task_ids = np.asarray(task_ids, dtype=int)
    if task_ids.shape != (spec.n_heads,):
        raise ValueError(f"need {spec.n_heads} task ids, got {task_ids.shape}")
    if np.any(task_ids < 0) or np.any(task_ids >= env.n_tasks):
        raise IndexError(f"task ids {task_ids.tolist()} out of range for {env.n_tasks} tasks")
    out = predict_all(spec, params, env.inputs)
    per_task = np.mean((out - env.label_matrix[task_ids]) ** 2, axis=1)
    mean = float(np.mean(per_task))
    return EvalReport([float(v) for v in per_task], mean, mean < threshold)


def perfect_trunk(trunk: MlpSpec, env: Environment, gain: float = 20.0) -> np.ndarray:
    """Hand-built trunk sending object class ``k`` to the binary code of ``k - 1``.

    The first layer thresholds the pixel count, which is shift invariant;
    extra hidden layers re-sharpen those thresholds, and the output layer
    combines them into one bit per output unit (corners of the unit cube,
    so distinct classes land at mutual distance >= 1).
    """
    L = env.max_run
    n_bits = max(1, math.ceil(math.log2(L)))
    layers = trunk.layers
    if len(layers) < 2:
        raise ValueError("the perfect trunk needs at least one hidden layer")
    if layers[0].inputs != env.retina_size:
        raise ValueError("trunk input width must equal the retina size")
    if any(l.activation != "sigmoid" for l in layers[:-1]):
        raise ValueError("the perfect trunk needs sigmoid hidden layers")
    if layers[-1].activation not in ("sigmoid", "identity"):
        raise ValueError("the perfect trunk needs a sigmoid or identity output layer")
    if any(l.outputs < L - 1 for l in layers[:-1]) or layers[-1].outputs < n_bits:
        raise ValueError(
            f"hidden layers need >= {L - 1} units and the output >= {n_bits} for L_max={L}"
        )

    params = np.zeros(param_count(trunk))
    views = unpack(trunk, params)  # views write through to params

    W, b = views[0]
    for j in range(1, L):
        W[j - 1, :] = gain
        b[j - 1] = -gain * (j + 0.5)
    for W, b in views[1:-1]:
        for j in range(L - 1):
            W[j, j] = 2.0 * gain
            b[j] = -gain

    W, b = views[-1]
    for bit in range(n_bits):
        # bit of (k - 1) written as a sum of step indicators [k >= j + 1]
        coeffs = [((j >> bit) & 1) - (((j - 1) >> bit) & 1) for j in range(1, L)]
        if layers[-1].activation == "sigmoid":
            W[bit, : L - 1] = 2.0 * gain * np.array(coeffs, dtype=float)
            b[bit] = -gain
        else:
            W[bit, : L - 1] = coeffs
    return params


def constant_trunk(trunk: MlpSpec) -> np.ndarray:
    """All-zero weights: every input maps to the same point of the feature space."""
    return np.zeros(param_count(trunk))


def representation_errors(
    spec: CompositeSpec,
    trunk_params: np.ndarray,
    env: Environment,
    cfg: TrainConfig,
) -> tuple[float, float]:
    """Mean and L-infinity representation error of a fixed trunk.

    For every task in the environment a head is fitted to the task's full
    truth table (best over ``cfg.restarts``; all fits run in lockstep).  The mean error averages the
    best head's squared residual over all tasks and inputs; the sup error
    is the largest such residual.
    """
    V = forward(spec.trunk, trunk_params, env.inputs)[-1]
    total = 0.0
    worst = 0.0
    fits = train_heads_lockstep(spec, trunk_params, env.inputs, env.label_matrix, cfg)
    for y, res in zip(env.label_matrix, fits):
        out = forward(spec.head, res.params, V)[-1][:, 0]
        resid = (out - y) ** 2
        total += float(np.sum(resid))
        worst = max(worst, float(np.max(resid)))
    return total / (env.n_tasks * env.n_inputs), worst


def representation_true_error(spec, trunk_params, env, cfg) -> float:
    return representation_errors(spec, trunk_params, env, cfg)[0]


def representation_sup_error(spec, trunk_params, env, cfg) -> float:
    return representation_errors(spec, trunk_params, env, cfg)[1]


def train_cell(
    env: Environment, spec: CompositeSpec, n: int, m: int, trial: int, cfg: TrainConfig
) -> SurfacePoint:
    seed = derived_seed(cfg.seed, n, m, trial)
    sample = sample_nm(env, n, m, seed)
    net = spec.with_heads(n)
    try:
        res = train_composite(net, sample, replace(cfg, seed=derived_seed(seed, 1)))
    except TrainingAborted:
        return SurfacePoint(n, m, trial, math.nan, math.nan, False, None, sample.task_ids)
    report = true_error_tasks(net, res.params, env, sample.task_ids)
    return SurfacePoint(
        n, m, trial, res.final_loss, report.mean_true_error,
        res.final_loss < cfg.loss_tol, res.params, sample.task_ids,
    )


def learning_surface(
    env: Environment,
    spec: CompositeSpec,
    n_values: Sequence[int],
    m_values: Sequence[int],
    trials: int,
    cfg: TrainConfig,
    keep_params: bool = False,
) -> list[SurfacePoint]:
    """Train and evaluate one network per ``(n, m, trial)`` cell.

    ``converged`` records whether the sample was fitted to ``cfg.loss_tol``.
    """
    if not n_values or not m_values:
        raise ValueError("n_values and m_values must be non-empty")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    points = []
    for n in n_values:
        for m in m_values:
            for trial in range(trials):
                p = train_cell(env, spec, int(n), int(m), trial, cfg)
                if not keep_params:
                    p.params = None
                points.append(p)
    return points


def transfer_curves(
    env: Environment,
    spec: CompositeSpec,
    frozen_trunk: np.ndarray,
    m_values: Sequence[int],
    restarts: int,
    cfg: TrainConfig,
) -> dict[str, list[TransferPoint]]:
    """Learning curves with the trunk frozen ("Gof") and with everything trainable ("GoF").

    Each of the ``restarts`` repetitions draws a fresh training row and a
    fresh initialisation for every task; both learners see the same row.
    Errors are exact over all inputs and averaged over tasks and repetitions.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    single = spec.with_heads(1)
    V_all = forward(spec.trunk, frozen_trunk, env.inputs)[-1]
    curves: dict[str, list[TransferPoint]] = {"Gof": [], "GoF": []}
    for m in m_values:
        errs: dict[str, list[float]] = {"Gof": [], "GoF": []}
        for t in range(env.n_tasks):
            y_all = env.label_matrix[t]
            for r in range(restarts):
                seed = derived_seed(cfg.seed, m, t, r)
                row = sample_task_row(env, t, int(m), seed)
                run_cfg = replace(cfg, restarts=1, seed=derived_seed(seed, 1))

                head = train_head_frozen_trunk(single, frozen_trunk, row, run_cfg)
                out = forward(spec.head, head.params, V_all)[-1][:, 0]
                errs["Gof"].append(float(np.mean((out - y_all) ** 2)))

                full = train_composite(single, row, run_cfg)
                errs["GoF"].append(true_error_tasks(single, full.params, env, [t]).mean_true_error)
        for name, vals in errs.items():
            a = np.array(vals)
            se = float(a.std(ddof=1) / math.sqrt(len(a))) if len(a) > 1 else 0.0
            curves[name].append(TransferPoint(name, int(m), float(a.mean()), se))
    return curves


def binomial_halfwidth(p: float, trials: int, z: float = 1.959963984540054) -> float:
    """Normal-approximation 95% half-width of a binomial proportion."""
    return z * math.sqrt(p * (1.0 - p) / trials)


def gap_probability_mc(
    env: Environment,
    spec: CompositeSpec,
    n: int,
    m: int,
    alpha: float,
    nu: float,
    trials: int,
    cfg: TrainConfig,
) -> GapEstimate:
    """Fraction of ``(n, m)``-samples whose trained network has ``d_nu(train, true) > alpha``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not nu > 0:
        raise ValueError("nu must be positive")
    if alpha >= 1:
        # d_nu < 1 for every pair of non-negative losses
        return GapEstimate(0.0, 0.0, trials)
    net = spec.with_heads(n)
    hits = 0
    for trial in range(trials):
        seed = derived_seed(cfg.seed, n, m, trial, 0x6A9)
        sample = sample_nm(env, n, m, seed)
        res = train_composite(net, sample, replace(cfg, seed=derived_seed(seed, 1)))
        true = true_error_tasks(net, res.params, env, sample.task_ids).mean_true_error
        if d_nu(res.final_loss, true, nu) > alpha:
            hits += 1
    p = hits / trials
    return GapEstimate(p, binomial_halfwidth(p, trials), trials)
