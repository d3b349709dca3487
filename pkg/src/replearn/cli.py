"""``replearn`` command-line front end.

Every subcommand takes ``--config`` (JSON, defaults otherwise), ``--out``
(output directory, overriding ``out_dir``) and ``--seed`` (overriding the
config seed).  Exit status is 0 on success, 2 for invalid input, 3 for I/O
failures and 4 when training aborts on non-finite values.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import svg
from .bounds import BoundInputs, sweep_n
from .config import ConfigError, ExperimentConfig, load_config
from .environment import Environment, sample_nm
from .evaluate import (
    SUCCESS_THRESHOLD,
    derived_seed,
    gap_probability_mc,
    learning_surface,
    perfect_trunk,
    representation_errors,
    transfer_curves,
    true_error_tasks,
)
from .modelfile import ModelFile, ModelFormatError, load_model, save_model
from .optimizer import TrainingAborted, train_composite

log = logging.getLogger("replearn")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_ABORT = 4

SURFACE_HEADER = ["n", "m", "trial", "train_loss", "true_error", "converged"]
REP_ERROR_HEADER = ["n_source", "sample_id", "mean_rep_error", "sup_rep_error"]
TRANSFER_HEADER = ["curve", "m", "mean_true_error", "stderr"]
GAP_HEADER = ["n", "m", "alpha", "nu", "trials", "p_hat", "ci_halfwidth"]
BOUNDS_HEADER = [
    "n", "m_bound_thm1", "n_bound_thm2", "m_bound_thm2", "a_term", "b_term", "eps1", "eps2", "vacuous_flag",
]
EVAL_HEADER = ["head", "task_id", "true_error"]


def _flag(b: bool) -> str:
    return "true" if b else "false"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _prepare_out(out: str) -> Path:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-test"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {path} is not writable: {exc.strerror or exc}") from exc
    return path


def _env(cfg: ExperimentConfig) -> Environment:
    return Environment(cfg.retina_size, cfg.max_run)


def cmd_surface(cfg: ExperimentConfig, out: Path, args) -> int:
    env, spec = _env(cfg), cfg.spec
    points = learning_surface(env, spec, cfg.n_values, cfg.m_values, cfg.trials, cfg.train)
    write_csv(
        out / "surface.csv",
        SURFACE_HEADER,
        ([p.n, p.m, p.trial, p.train_loss, p.true_error, _flag(p.converged)] for p in points),
    )
    cells = defaultdict(list)
    for p in points:
        if math.isfinite(p.true_error):
            cells[p.n, p.m].append(p.true_error)
    grid = [
        [float(np.mean(cells[n, m])) if cells[n, m] else math.nan for m in cfg.m_values]
        for n in cfg.n_values
    ]
    _write_text(
        out / "surface.svg",
        svg.heatmap(grid, cfg.n_values, cfg.m_values, "mean true error", "n (tasks)", "m (examples per task)"),
    )
    log.info("wrote %d surface rows to %s", len(points), out / "surface.csv")
    return EXIT_OK


def cmd_reperror(cfg: ExperimentConfig, out: Path, args) -> int:
    env, spec = _env(cfg), cfg.spec
    points = learning_surface(env, spec, cfg.n_values, cfg.m_values, cfg.trials, cfg.train, keep_params=True)
    rows = []
    if args.perfect_trunk:
        mean, sup = representation_errors(spec, perfect_trunk(spec.trunk, env), env, cfg.train)
        rows.append([0, "perfect", mean, sup])
    for p in points:
        if p.params is None or not p.true_error < SUCCESS_THRESHOLD:
            continue
        mean, sup = representation_errors(spec, p.params.trunk, env, cfg.train)
        rows.append([p.n, f"m{p.m}-t{p.trial}", mean, sup])
    rows.sort(key=lambda r: r[0])
    if not rows:
        log.warning("no successful cells (true error < %g); writing header only", SUCCESS_THRESHOLD)
    write_csv(out / "rep_error.csv", REP_ERROR_HEADER, rows)

    by_n = defaultdict(list)
    for n, _, mean, sup in rows:
        by_n[n].append((mean, sup))
    ns = sorted(by_n)
    _write_text(
        out / "rep_error.svg",
        svg.line_chart(
            {
                "mean": (ns, [float(np.mean([v[0] for v in by_n[n]])) for n in ns]),
                "sup": (ns, [float(np.mean([v[1] for v in by_n[n]])) for n in ns]),
            },
            "representation error (restart-estimated infimum)",
            "n (source tasks)",
            "error",
        ),
    )
    return EXIT_OK


def cmd_transfer(cfg: ExperimentConfig, out: Path, args) -> int:
    env, spec = _env(cfg), cfg.spec
    curves = transfer_curves(
        env, spec, perfect_trunk(spec.trunk, env), cfg.transfer_m_values, cfg.transfer_repetitions, cfg.train
    )
    write_csv(
        out / "transfer.csv",
        TRANSFER_HEADER,
        ([p.curve, p.m, p.mean_true_error, p.stderr] for name in ("Gof", "GoF") for p in curves[name]),
    )
    _write_text(
        out / "transfer.svg",
        svg.line_chart(
            {name: ([p.m for p in pts], [p.mean_true_error for p in pts]) for name, pts in curves.items()},
            "learning with and without a representation",
            "m (examples)",
            "mean true error",
        ),
    )
    return EXIT_OK


def cmd_gap(cfg: ExperimentConfig, out: Path, args) -> int:
    env, spec = _env(cfg), cfg.spec
    rows = []
    for m in cfg.gap_m_values:
        est = gap_probability_mc(env, spec, cfg.gap_n, m, cfg.gap_alpha, cfg.gap_nu, cfg.gap_trials, cfg.train)
        rows.append([cfg.gap_n, m, cfg.gap_alpha, cfg.gap_nu, est.trials, est.p_hat, est.ci_halfwidth])
    write_csv(out / "gap.csv", GAP_HEADER, rows)
    return EXIT_OK


def bound_inputs(cfg: ExperimentConfig) -> BoundInputs:
    spec = cfg.spec
    return BoundInputs(
        M=cfg.bound_M,
        alpha=cfg.bound_alpha,
        nu=cfg.bound_nu,
        delta=cfg.bound_delta,
        W_F=cfg.bound_W_F if cfg.bound_W_F is not None else spec.trunk_size,
        W_G=cfg.bound_W_G if cfg.bound_W_G is not None else spec.head_size,
        k=cfg.bound_k,
        k_prime=cfg.bound_k_prime,
    )


def cmd_bounds(cfg: ExperimentConfig, out: Path, args) -> int:
    reports = sweep_n(bound_inputs(cfg), cfg.bound_n_values)
    write_csv(
        out / "bounds.csv",
        BOUNDS_HEADER,
        (
            [r.n, r.m_bound_thm1, r.n_bound_thm2, r.m_bound_thm2, r.a_term, r.b_term, r.eps1, r.eps2, _flag(r.vacuous)]
            for r in reports
        ),
    )
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig, out: Path, args) -> int:
    env = _env(cfg)
    n, m = args.n, args.m
    seed = derived_seed(cfg.seed, n, m, 0)
    sample = sample_nm(env, n, m, seed)
    spec = cfg.spec.with_heads(n)
    res = train_composite(spec, sample, replace(cfg.train, seed=derived_seed(seed, 1)))
    report = true_error_tasks(spec, res.params, env, sample.task_ids)
    provenance = {
        "config_hash": cfg.digest(),
        "seed": cfg.seed,
        "n": n,
        "m": m,
        "task_ids": [int(t) for t in sample.task_ids],
        "train_loss": res.final_loss,
    }
    path = Path(args.model) if args.model else out / "model.json"
    save_model(path, ModelFile(spec, res.params, provenance))
    print(f"train_loss={res.final_loss!r} true_error={report.mean_true_error!r} model={path}")
    return EXIT_OK


def cmd_eval(cfg: ExperimentConfig, out: Path, args) -> int:
    if not args.model:
        raise ConfigError(["eval needs --model"])
    model = load_model(args.model)
    env = _env(cfg)
    if args.tasks is not None:
        task_ids = [int(t) for t in args.tasks.split(",")]
    else:
        task_ids = model.provenance.get("task_ids")
        if task_ids is None:
            raise ConfigError(["model has no task_ids in its provenance; pass --tasks"])
    report = true_error_tasks(model.spec, model.params, env, task_ids)
    write_csv(
        out / "eval.csv",
        EVAL_HEADER,
        ([i, t, e] for i, (t, e) in enumerate(zip(task_ids, report.per_task_true_error))),
    )
    print(f"mean_true_error={report.mean_true_error!r} success={_flag(report.success)}")
    return EXIT_OK


COMMANDS = {
    "surface": cmd_surface,
    "reperror": cmd_reperror,
    "transfer": cmd_transfer,
    "gap": cmd_gap,
    "bounds": cmd_bounds,
    "train": cmd_train,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="replearn", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--out", help="output directory (default: config out_dir)")
    common.add_argument("--seed", type=int, help="global seed, overrides the config")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "surface": "train the (n, m) learning surface",
        "reperror": "representation error of trunks from successful surface cells",
        "transfer": "learning curves with and without the perfect representation",
        "gap": "Monte-Carlo estimate of the generalisation-gap probability",
        "bounds": "sweep the sample-complexity bounds over n",
        "train": "train one composite network and save it",
        "eval": "exact true error of a saved model",
    }
    parsers = {name: sub.add_parser(name, parents=[common], help=h) for name, h in helps.items()}
    parsers["reperror"].add_argument(
        "--perfect-trunk", action="store_true", help="add a row for the hand-built trunk (n_source=0)"
    )
    parsers["train"].add_argument("--n", type=int, default=5, help="number of tasks")
    parsers["train"].add_argument("--m", type=int, default=71, help="examples per task")
    parsers["train"].add_argument("--model", help="model path (default: <out>/model.json)")
    parsers["eval"].add_argument("--model", help="model file to evaluate")
    parsers["eval"].add_argument("--tasks", help="comma-separated task ids (default: from the model)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.command == "train" and (args.n < 1 or args.m < 1):
            raise ConfigError(["--n and --m must be positive"])
        out = _prepare_out(args.out or cfg.out_dir)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ModelFormatError as exc:
        print(f"error: {args.model}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TrainingAborted as exc:
        print(f"error: training aborted at iteration {exc.iteration}: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
