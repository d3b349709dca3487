"""Polak-Ribiere conjugate gradient with a bracketing golden-section line search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .composite import CompositeParams, CompositeSpec, head_objective, init_composite, joint_objective
from .environment import NMSample
from .nnet import backward, forward, init_params

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class TrainingAborted(RuntimeError):
    """The loss or gradient became non-finite during optimization."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class TrainConfig:
    max_iters: int = 2000
    grad_tol: float = 1e-6
    loss_tol: float = 1e-4
    restarts: int = 32
    line_search_tol: float = 1e-8
    line_search_max_expand: int = 60
    seed: int = 0
    init_scale: float = 0.5
    # stop drawing new initialisations once one restart reaches loss_tol
    stop_on_success: bool = True

    def __post_init__(self):
        errors = []
        if self.max_iters < 1:
            errors.append("max_iters must be >= 1")
        if self.restarts < 1:
            errors.append("restarts must be >= 1")
        for name in ("grad_tol", "loss_tol", "line_search_tol", "init_scale"):
            if not getattr(self, name) > 0:
                errors.append(f"{name} must be > 0")
        if self.line_search_max_expand < 0:
            errors.append("line_search_max_expand must be >= 0")
        if errors:
            raise ValueError("; ".join(errors))


@dataclass
class TrainResult:
    params: object  # CompositeParams, or a flat ndarray for head-only / plain CG runs
    final_loss: float
    iterations: int
    converged: bool
    restart_index_of_best: int = 0
    restart_losses: list[float] = field(default_factory=list)
    history: list[float] = field(default_factory=list)


class LineSearchResult(NamedTuple):
    t: float
    value: float
    progress: bool
    evaluations: int



# The line search and conjugate gradient are written as generators that
# yield the points they need evaluated.  `conjugate_gradient` answers those
# requests one at a time; `run_lockstep` advances many independent runs
# together and answers their requests with one batched evaluation.


def _golden_steps(lo: float, hi: float, tol: float):
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc = yield c
    fd = yield d
    evals = 2
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = yield c
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = yield d
        evals += 1
    return 0.5 * (lo + hi), evals


def _line_search_steps(t_init: float, tol: float, max_expand: int, f0: float, evals: int):
    t = float(t_init)
    ft = yield t
    evals += 1

    if ft >= f0:
        # overshoot: halve until something below phi(0) appears
        for _ in range(max_expand):
            if t <= tol:
                break
            t *= 0.5
            ft = yield t
            evals += 1
            if ft < f0:
                break
        if ft >= f0:
            return LineSearchResult(0.0, f0, False, evals)
        lo, hi = 0.0, 2.0 * t
    else:
        prev, cur, fcur = 0.0, t, ft
        hi = None
        for _ in range(max_expand):
            nxt = 2.0 * cur
            fn = yield nxt
            evals += 1
            if fn >= fcur:
                hi = nxt
                break
            prev, cur, fcur = cur, nxt, fn
        if hi is None:
            return LineSearchResult(cur, fcur, True, evals)
        lo = prev

    t_star, n = yield from _golden_steps(lo, hi, tol)
    evals += n
    f_star = yield t_star
    evals += 1
    if f_star > f0:
        return LineSearchResult(0.0, f0, False, evals)
    return LineSearchResult(t_star, f_star, True, evals)


def _finite_or_inf(v: float) -> float:
    return v if math.isfinite(v) else math.inf


def _drive_scalar(gen, phi):
    try:
        t = next(gen)
        while True:
            t = gen.send(_finite_or_inf(phi(t)))
    except StopIteration as stop:
        return stop.value


def golden_section(phi, lo: float, hi: float, tol: float) -> tuple[float, int]:
    """Shrink ``[lo, hi]`` around a minimum of a unimodal ``phi``; returns the midpoint."""
    return _drive_scalar(_golden_steps(lo, hi, tol), phi)


def line_search(
    phi: Callable[[float], float],
    t_init: float = 1.0,
    tol: float = 1e-8,
    max_expand: int = 60,
    phi0: float | None = None,
) -> LineSearchResult:
    """Approximately exact minimization of ``phi`` over ``t >= 0``.

    A bracket is found by doubling from ``t_init`` (halving first if
    ``t_init`` already overshoots), then golden-section search narrows it to
    width ``tol``.  If no point below ``phi(0)`` is found the result is
    ``t = 0`` with ``progress=False``.  Non-finite values count as ``+inf``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if phi0 is None:
        f0, evals = _finite_or_inf(phi(0.0)), 1
    else:
        f0, evals = phi0, 0
    return _drive_scalar(_line_search_steps(t_init, tol, max_expand, f0, evals), phi)


def _along_line(gen, w0: np.ndarray, d: np.ndarray):
    """Turn a line search's requests for ``phi(t)`` into loss requests at ``w0 + t d``."""
    try:
        t = next(gen)
        while True:
            v = yield ("loss", w0 + t * d)
            t = gen.send(_finite_or_inf(v))
    except StopIteration as stop:
        return stop.value


def _cg_steps(init: np.ndarray, cfg: TrainConfig):
    """Polak-Ribiere CG as a generator of ``("loss" | "grad", w)`` requests."""
    w = np.array(init, dtype=float)
    if not np.all(np.isfinite(w)):
        raise TrainingAborted("non-finite initial parameters", 0)
    dim = w.size
    f = float((yield ("loss", w)))
    g = np.asarray((yield ("grad", w)), dtype=float)
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise TrainingAborted("non-finite loss or gradient", 0)
    history = [f]

    def done(f, g):
        return f < cfg.loss_tol or float(np.max(np.abs(g), initial=0.0)) < cfg.grad_tol

    if done(f, g):
        return TrainResult(w, f, 0, True, history=history)

    d = -g
    steepest = True
    since_reset = 0
    t_init = 1.0 / float(np.linalg.norm(g))
    converged = False
    it = 0
    while it < cfg.max_iters:
        it += 1
        w0 = w
        ls = yield from _along_line(
            _line_search_steps(t_init, cfg.line_search_tol, cfg.line_search_max_expand, f, 0), w0, d
        )
        if not ls.progress:
            if steepest:
                break
            d, steepest, since_reset = -g, True, 0
            t_init = 1.0 / float(np.linalg.norm(g))
            continue
        step = ls.t * d
        w = w0 + step
        f = ls.value
        g_new = np.asarray((yield ("grad", w)), dtype=float)
        if not (math.isfinite(f) and np.all(np.isfinite(g_new))):
            raise TrainingAborted("non-finite loss or gradient", it)
        history.append(f)
        if done(f, g_new):
            g = g_new
            converged = True
            break

        beta = float(g_new @ (g_new - g)) / float(g @ g)
        since_reset += 1
        d_new = -g_new + beta * d
        if since_reset >= dim or float(d_new @ g_new) >= 0.0:
            d_new, since_reset, steepest = -g_new, 0, True
        else:
            steepest = False
        step_len = float(np.linalg.norm(step))
        dn = float(np.linalg.norm(d_new))
        t_init = step_len / dn if step_len > 0 else 1.0 / dn
        d, g = d_new, g_new

    return TrainResult(w, f, it, converged, history=history)


def conjugate_gradient(
    loss: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    init: np.ndarray,
    cfg: TrainConfig,
) -> TrainResult:
    """Minimize ``loss`` from ``init`` with Polak-Ribiere directions.

    The direction resets to steepest descent every ``len(init)`` iterations
    and whenever the conjugate direction is not a descent direction.
    """
    gen = _cg_steps(init, cfg)
    try:
        kind, w = next(gen)
        while True:
            kind, w = gen.send(loss(w) if kind == "loss" else grad(w))
    except StopIteration as stop:
        return stop.value


# line-search phases of a lockstep lane; each awaits one loss value
_LS_FIRST, _LS_HALVE, _LS_DOUBLE, _LS_C0, _LS_D0, _LS_C, _LS_D, _LS_FINAL = range(8)
# lane-level phases outside the line search
_INIT_LOSS, _INIT_GRAD, _GRAD, _SEARCH, _FINISHED, _PENDING = range(10, 16)


class Schedule(NamedTuple):
    """Lanes to start and lanes to cancel, returned by a lockstep ``on_finish`` hook."""

    start: Iterable[int] = ()
    cancel: Iterable[int] = ()


class _Lockstep:
    """Many independent CG runs advanced together, one batched evaluation per round.

    The line-search state machine is vectorised over lanes; the once-per-
    iteration direction update runs per lane.  Both follow `_cg_steps` and
    `_line_search_steps` operation for operation, so a lane given the same
    loss and gradient values produces the same floating-point trajectory.
    """

    def __init__(self, inits, cfg, batch_loss, batch_grad, on_finish, start):
        self.cfg = cfg
        self.batch_loss, self.batch_grad, self.on_finish = batch_loss, batch_grad, on_finish
        W = np.array([np.asarray(w, dtype=float) for w in inits])
        K = len(W)
        if not np.all(np.isfinite(W)):
            raise TrainingAborted("non-finite initial parameters", 0)
        self.W, self.W0 = W, W.copy()
        self.G, self.D = np.zeros_like(W), np.zeros_like(W)
        self.f = np.zeros(K)
        self.phase = np.full(K, _INIT_LOSS if start is None else _PENDING)
        if start is not None:
            self.phase[np.asarray(list(start), dtype=int)] = _INIT_LOSS
        self.ls = np.full(K, -1)
        z = lambda: np.zeros(K)
        self.t, self.f0, self.ft, self.lo, self.hi = z(), z(), z(), z(), z()
        self.prev, self.cur, self.fcur, self.c, self.d, self.fc, self.fd = z(), z(), z(), z(), z(), z(), z()
        self.k = np.zeros(K, dtype=int)
        self.t_init = z()
        self.steepest = np.ones(K, dtype=bool)
        self.since_reset = np.zeros(K, dtype=int)
        self.it = np.zeros(K, dtype=int)
        self.history = [[] for _ in range(K)]
        self.results: list[TrainResult | None] = [None] * K

    # -- per-lane CG bookkeeping -------------------------------------------

    def _done(self, f, g):
        return f < self.cfg.loss_tol or float(np.max(np.abs(g), initial=0.0)) < self.cfg.grad_tol

    def _finish(self, i, converged):
        self.phase[i] = _FINISHED
        res = TrainResult(self.W[i].copy(), float(self.f[i]), int(self.it[i]), converged, history=self.history[i])
        self.results[i] = res
        if self.on_finish is None:
            return
        sched = self.on_finish(i, res)
        for j in sched.cancel:
            self.phase[j] = _FINISHED
        for j in sched.start:
            if self.phase[j] == _PENDING:
                self.phase[j] = _INIT_LOSS

    def _start_iter(self, i, new_search):
        if self.it[i] >= self.cfg.max_iters:
            self._finish(i, False)
            return
        self.it[i] += 1
        self.W0[i] = self.W[i]
        self.phase[i] = _SEARCH
        self.f0[i] = self.f[i]
        self.t[i] = self.t_init[i]
        new_search.append(i)

    def _after_init_grad(self, i, g, new_search):
        f = float(self.f[i])
        if not (math.isfinite(f) and np.all(np.isfinite(g))):
            raise TrainingAborted("non-finite loss or gradient", 0)
        self.G[i] = g
        self.history[i].append(f)
        if self._done(f, g):
            self._finish(i, True)
            return
        self.D[i] = -g
        self.steepest[i] = True
        self.since_reset[i] = 0
        self.t_init[i] = 1.0 / float(np.linalg.norm(g))
        self._start_iter(i, new_search)

    def _after_search(self, i, t, value, progress, new_search):
        if not progress:
            if self.steepest[i]:
                self._finish(i, False)
                return
            self.D[i] = -self.G[i]
            self.steepest[i], self.since_reset[i] = True, 0
            self.t_init[i] = 1.0 / float(np.linalg.norm(self.G[i]))
            self._start_iter(i, new_search)
            return
        step = t * self.D[i]
        self.W[i] = self.W0[i] + step
        self.f[i] = value
        self.t[i] = t  # kept for the step length after the gradient arrives
        self.phase[i] = _GRAD

    def _after_grad(self, i, g_new, new_search):
        f = float(self.f[i])
        if not (math.isfinite(f) and np.all(np.isfinite(g_new))):
            raise TrainingAborted("non-finite loss or gradient", int(self.it[i]))
        self.history[i].append(f)
        if self._done(f, g_new):
            self.G[i] = g_new
            self._finish(i, True)
            return
        g, d = self.G[i], self.D[i]
        beta = float(g_new @ (g_new - g)) / float(g @ g)
        self.since_reset[i] += 1
        d_new = -g_new + beta * d
        if self.since_reset[i] >= self.W.shape[1] or float(d_new @ g_new) >= 0.0:
            d_new, self.since_reset[i], self.steepest[i] = -g_new, 0, True
        else:
            self.steepest[i] = False
        step_len = float(np.linalg.norm(self.t[i] * d))
        dn = float(np.linalg.norm(d_new))
        self.t_init[i] = step_len / dn if step_len > 0 else 1.0 / dn
        self.D[i], self.G[i] = d_new, g_new
        self._start_iter(i, new_search)

    # -- vectorised line search --------------------------------------------

    def _halve_check(self, idx):
        tol, mx = self.cfg.line_search_tol, self.cfg.line_search_max_expand
        stop = (self.k[idx] >= mx) | (self.t[idx] <= tol)
        self._halve_end(idx[stop])
        go = idx[~stop]
        self.t[go] *= 0.5
        self.k[go] += 1
        self.ls[go] = _LS_HALVE

    def _halve_end(self, idx):
        fail = self.ft[idx] >= self.f0[idx]
        self._ls_result(idx[fail], np.zeros(fail.sum()), self.f0[idx[fail]], False)
        ok = idx[~fail]
        self.lo[ok] = 0.0
        self.hi[ok] = 2.0 * self.t[ok]
        self._gold_start(ok)

    def _double_check(self, idx):
        full = self.k[idx] >= self.cfg.line_search_max_expand
        self._ls_result(idx[full], self.cur[idx[full]], self.fcur[idx[full]], True)
        go = idx[~full]
        self.t[go] = 2.0 * self.cur[go]
        self.k[go] += 1
        self.ls[go] = _LS_DOUBLE

    def _gold_start(self, idx):
        lo, hi = self.lo[idx], self.hi[idx]
        self.c[idx] = hi - INV_PHI * (hi - lo)
        self.d[idx] = lo + INV_PHI * (hi - lo)
        self.t[idx] = self.c[idx]
        self.ls[idx] = _LS_C0

    def _gold_loop(self, idx):
        lo, hi = self.lo[idx], self.hi[idx]
        more = hi - lo > self.cfg.line_search_tol
        fin = idx[~more]
        self.t[fin] = 0.5 * (self.lo[fin] + self.hi[fin])
        self.ls[fin] = _LS_FINAL
        idx = idx[more]
        left = self.fc[idx] <= self.fd[idx]
        a = idx[left]
        self.hi[a], self.d[a], self.fd[a] = self.d[a], self.c[a], self.fc[a]
        self.c[a] = self.hi[a] - INV_PHI * (self.hi[a] - self.lo[a])
        self.t[a] = self.c[a]
        self.ls[a] = _LS_C
        b = idx[~left]
        self.lo[b], self.c[b], self.fc[b] = self.c[b], self.d[b], self.fd[b]
        self.d[b] = self.lo[b] + INV_PHI * (self.hi[b] - self.lo[b])
        self.t[b] = self.d[b]
        self.ls[b] = _LS_D

    def _ls_result(self, idx, t, value, progress):
        for i, ti, vi in zip(idx.tolist(), t.tolist(), value.tolist()):
            self._search_done.append((i, ti, vi, progress))

    def _advance_search(self, idx, v):
        """Feed loss values ``v`` to lanes ``idx`` that are inside a line search."""
        ls = self.ls[idx]
        sel = lambda code: (idx[ls == code], v[ls == code])

        i, x = sel(_LS_FIRST)
        self.ft[i] = x
        over = x >= self.f0[i]
        self.k[i] = 0
        self._halve_check(i[over])
        u = i[~over]
        self.prev[u], self.cur[u], self.fcur[u] = 0.0, self.t[u], x[~over]
        self._double_check(u)

        i, x = sel(_LS_HALVE)
        self.ft[i] = x
        below = x < self.f0[i]
        self._halve_end(i[below])
        self._halve_check(i[~below])

        i, x = sel(_LS_DOUBLE)
        up = x >= self.fcur[i]
        e = i[up]
        self.hi[e], self.lo[e] = self.t[e], self.prev[e]
        self._gold_start(e)
        u = i[~up]
        self.prev[u], self.cur[u], self.fcur[u] = self.cur[u], self.t[u], x[~up]
        self._double_check(u)

        i, x = sel(_LS_C0)
        self.fc[i] = x
        self.t[i] = self.d[i]
        self.ls[i] = _LS_D0

        i, x = sel(_LS_D0)
        self.fd[i] = x
        self._gold_loop(i)

        i, x = sel(_LS_C)
        self.fc[i] = x
        self._gold_loop(i)

        i, x = sel(_LS_D)
        self.fd[i] = x
        self._gold_loop(i)

        i, x = sel(_LS_FINAL)
        worse = x > self.f0[i]
        self._ls_result(i[worse], np.zeros(worse.sum()), self.f0[i[worse]], False)
        self._ls_result(i[~worse], self.t[i[~worse]], x[~worse], True)

    # -- driver ------------------------------------------------------------

    def run(self):
        while True:
            phase = self.phase
            loss_idx = np.flatnonzero((phase == _INIT_LOSS) | (phase == _SEARCH))
            grad_idx = np.flatnonzero((phase == _INIT_GRAD) | (phase == _GRAD))
            if not len(loss_idx) and not len(grad_idx):
                return self.results
            init_lanes = phase[loss_idx] == _INIT_LOSS
            if len(loss_idx):
                P = self.W[loss_idx].copy()
                s = ~init_lanes
                P[s] = self.W0[loss_idx[s]] + self.t[loss_idx[s], None] * self.D[loss_idx[s]]
                values = np.asarray(self.batch_loss(loss_idx, P), dtype=float)
            if len(grad_idx):
                grads = np.asarray(self.batch_grad(grad_idx, self.W[grad_idx]), dtype=float)

            new_search: list[int] = []
            self._search_done = []
            if len(loss_idx):
                for i, v in zip(loss_idx[init_lanes].tolist(), values[init_lanes].tolist()):
                    self.f[i] = v
                    self.phase[i] = _INIT_GRAD
                s = loss_idx[~init_lanes]
                v = values[~init_lanes]
                v = np.where(np.isfinite(v), v, math.inf)
                self._advance_search(s, v)
            if len(grad_idx):
                for i, g in zip(grad_idx.tolist(), grads):
                    if self.phase[i] == _FINISHED:
                        continue
                    if self.phase[i] == _INIT_GRAD:
                        self._after_init_grad(i, g, new_search)
                    else:
                        self._after_grad(i, g, new_search)
            for i, t, value, progress in self._search_done:
                if self.phase[i] != _FINISHED:
                    self._after_search(i, t, value, progress, new_search)
            if new_search:
                self.ls[np.array(new_search)] = _LS_FIRST


def run_lockstep(
    inits: Sequence[np.ndarray],
    cfg: TrainConfig,
    batch_loss: Callable[[np.ndarray, np.ndarray], np.ndarray],
    batch_grad: Callable[[np.ndarray, np.ndarray], np.ndarray],
    on_finish: Callable[[int, TrainResult], Schedule] | None = None,
    start: Iterable[int] | None = None,
) -> list[TrainResult | None]:
    """Run one CG per entry of ``inits`` together, batching their evaluations.

    ``batch_loss(lanes, W)`` and ``batch_grad(lanes, W)`` evaluate the loss
    and gradient of lane ``lanes[k]`` at ``W[k]``.  Given the same values a
    lane follows exactly the trajectory of :func:`conjugate_gradient`.
    Only the lanes in ``start`` (default: all) begin immediately; the
    :class:`Schedule` returned by ``on_finish(lane, result)`` starts pending
    lanes and cancels others.  Lanes never finished have result None.
    """
    return _Lockstep(inits, cfg, batch_loss, batch_grad, on_finish, start).run()


def _pick_best(results: Sequence[TrainResult], cfg: TrainConfig) -> TrainResult:
    """The sequential restart rule applied to already-computed restarts."""
    best = None
    losses = []
    for r, res in enumerate(results):
        losses.append(res.final_loss)
        if best is None or res.final_loss < best.final_loss:
            best = res
            best.restart_index_of_best = r
        if cfg.stop_on_success and res.final_loss < cfg.loss_tol:
            break
    best.restart_losses = losses
    return best


def _best_of_restarts(run, cfg: TrainConfig) -> TrainResult:
    results = []
    for r in range(cfg.restarts):
        results.append(run(cfg.seed + r))
        if cfg.stop_on_success and results[-1].final_loss < cfg.loss_tol:
            break
    return _pick_best(results, cfg)


def train_composite(spec: CompositeSpec, sample: NMSample, cfg: TrainConfig) -> TrainResult:
    """Jointly fit trunk and all heads; best over seeded restarts ``cfg.seed + r``."""
    loss, grad = joint_objective(spec, sample)

    def run(seed):
        init = init_composite(spec, seed, cfg.init_scale).flatten()
        res = conjugate_gradient(loss, grad, init, cfg)
        res.params = CompositeParams.from_flat(spec, res.params)
        return res

    return _best_of_restarts(run, cfg)


def train_head_frozen_trunk(
    spec: CompositeSpec,
    trunk_params: np.ndarray,
    row,
    cfg: TrainConfig,
) -> TrainResult:
    """Fit one head on top of a fixed trunk.

    ``row`` is either a one-row :class:`NMSample` or an ``(X, y)`` pair.
    The returned ``params`` is the head's flat parameter vector.
    """
    if isinstance(row, NMSample):
        if row.n != 1:
            raise ValueError("head-only training takes a single row")
        X, y = row.inputs[0], row.labels[0]
    else:
        X, y = row
    V = forward(spec.trunk, trunk_params, np.asarray(X, dtype=float))[-1]
    loss, grad = head_objective(spec.head, V, y)

    def run(seed):
        return conjugate_gradient(loss, grad, init_params(spec.head, seed, cfg.init_scale), cfg)

    return _best_of_restarts(run, cfg)


def train_heads_lockstep(
    spec: CompositeSpec,
    trunk_params: np.ndarray,
    X: np.ndarray,
    Y: np.ndarray,
    cfg: TrainConfig,
    window: int | None = None,
) -> list[TrainResult]:
    """Best-of-restarts head fits for every target row of ``Y`` on one frozen trunk.

    Row ``i`` of the result equals ``train_head_frozen_trunk`` on
    ``(X, Y[i])``: the same initialisations, the same restart rule and, since
    the stacked evaluation reproduces the single-head arithmetic, the same
    bits.  Runs
    advance together and share stacked network evaluations.  Each row keeps
    at most ``window`` restarts in flight (default: all of them).  A small
    window wastes less work on restarts the sequential rule would never
    reach, a large one needs fewer rounds when most restarts fail.  It only
    affects speed, never the result.
    """
    R = cfg.restarts
    window = R if window is None else window
    if window < 1:
        raise ValueError("window must be >= 1")
    V = forward(spec.trunk, trunk_params, np.asarray(X, dtype=float))[-1]
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n_rows, N = Y.shape
    scale = 2.0 / N

    def batch_loss(lanes, W):
        Vb = np.broadcast_to(V, (len(lanes),) + V.shape)
        r = forward(spec.head, W, Vb)[-1][..., 0] - Y[lanes // R]
        return np.sum(r * r, axis=-1) / N

    def batch_grad(lanes, W):
        Vb = np.broadcast_to(V, (len(lanes),) + V.shape)
        acts = forward(spec.head, W, Vb)
        resid = acts[-1][..., 0] - Y[lanes // R]
        g, _ = backward(spec.head, W, Vb, scale * resid[..., None], acts)
        return g

    w = min(window, R)
    next_restart = [w] * n_rows
    first_success = [R] * n_rows

    def on_finish(lane, res):
        row, r = divmod(lane, R)
        if cfg.stop_on_success and res.final_loss < cfg.loss_tol and r < first_success[row]:
            # the sequential rule never runs restarts after the first success
            first_success[row] = r
            return Schedule(cancel=range(row * R + r + 1, (row + 1) * R))
        if next_restart[row] < first_success[row]:
            next_restart[row] += 1
            return Schedule(start=[row * R + next_restart[row] - 1])
        return Schedule()

    inits = [init_params(spec.head, cfg.seed + r, cfg.init_scale) for _ in range(n_rows) for r in range(R)]
    start = [row * R + r for row in range(n_rows) for r in range(w)]
    results = run_lockstep(inits, cfg, batch_loss, batch_grad, on_finish, start)
    return [_pick_best(results[i * R : (i + 1) * R], cfg) for i in range(n_rows)]
