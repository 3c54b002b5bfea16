"""Command-line front end.

Subcommands: run (adaptive construction), reference (long direct-model
chain), uniform (fixed-size baseline error table), resume (continue a
checkpointed run), report (summarize a finished run directory).

Exit codes: 0 success, 2 configuration error, 3 forward-model failure,
4 I/O or checkpoint error. The UQ_THREADS environment variable caps worker
parallelism everywhere.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bayes import chain_from_callable
from .config import ConfigError, RunConfig, load_config, materialize, parse_config
from .driver import run_adaptive, run_uniform
from .io import (CheckpointError, fmt, read_checkpoint, summarize,
                 write_checkpoint, write_convergence_csv)
from .models.base import EvaluationError
from .util import subseed

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_IO = 4

log = logging.getLogger(__name__)


def _level_or_exact(text: str):
    if text == "exact":
        return "exact"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected an integer level or 'exact', got {text!r}")


def _int_list(text: str):
    try:
        return [int(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a comma-separated integer list, got {text!r}")


def _with_seed(cfg: RunConfig, seed) -> RunConfig:
    """Apply a --seed override to the master seed, if one was given."""
    if seed is None:
        return cfg
    adaptive = dataclasses.replace(cfg.adaptive, master_seed=int(seed))
    return dataclasses.replace(cfg, adaptive=adaptive)


def _build_all(cfg: RunConfig):
    model = cfg.build_model()
    posterior = cfg.build_posterior(model)
    target = cfg.build_target()
    return model, posterior, target


def _run_to_dir(cfg: RunConfig, out_dir: Path, initial=None, resume_records=(),
                resume_solves=None):
    """Execute the adaptive loop, persisting artifacts into out_dir."""
    model, posterior, target = _build_all(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    mat = materialize(cfg)
    (out_dir / "config.json").write_text(
        json.dumps(mat, indent=1, sort_keys=True) + "\n")

    records = list(resume_records)

    def sink(record, surrogate, solves):
        records.append(record)
        write_checkpoint(out_dir / "checkpoint.json", mat, records, surrogate,
                         solves)
        write_convergence_csv(out_dir / "convergence.csv", records, cfg.reference)

    result = run_adaptive(model, posterior, target, cfg.adaptive, sink=sink,
                          initial=initial, resume_records=resume_records,
                          resume_solves=resume_solves)
    # final rewrite records the stop reason and keeps resume output
    # byte-identical to an uninterrupted run
    write_checkpoint(out_dir / "checkpoint.json", mat, result.records,
                     result.surrogate, stopped_by=result.stopped_by)
    write_convergence_csv(out_dir / "convergence.csv", result.records,
                          cfg.reference)
    text = summarize(mat, result.records, result.stopped_by, cfg.reference)
    (out_dir / "summary.txt").write_text(text)
    sys.stdout.write(text)
    return result


def cmd_run(args) -> int:
    cfg = _with_seed(load_config(args.config), args.seed)
    out_dir = Path(args.out) if args.out else Path(cfg.output_dir)
    _run_to_dir(cfg, out_dir)
    return EXIT_OK


def cmd_reference(args) -> int:
    cfg = _with_seed(load_config(args.config), args.seed)
    samples = args.samples if args.samples is not None else 1_000_000
    if samples < 1:
        raise ConfigError("reference needs a positive number of samples")
    model, posterior, target = _build_all(cfg)

    if args.level == "exact":
        try:
            model.exact_qoi(posterior.space.lower)
        except NotImplementedError as exc:
            raise ConfigError(str(exc)) from exc
        qoi_fn, mode = model.exact_qoi, "exact outputs"
    else:
        level = args.level if args.level is not None else model.ladder.n_levels
        if not 1 <= level <= model.ladder.n_levels:
            raise ConfigError(
                f"level {level} outside ladder 1..{model.ladder.n_levels}")
        qoi_fn = lambda lam: model.evaluate(lam, level).values
        mode = f"level {level} outputs"

    burn_in = min(10_000, samples // 10)
    seed = subseed(cfg.adaptive.master_seed, "reference", 0)
    chain = chain_from_callable(posterior, qoi_fn, samples + burn_in, burn_in,
                                cfg.adaptive.proposal_scale, seed)
    values = target.evaluate(chain.states)
    mean = float(values.mean())
    # batch-means standard error; correlated draws make the naive s/sqrt(M)
    # estimate optimistic
    n_batches = max(2, min(50, samples // 100))
    usable = (samples // n_batches) * n_batches
    batch_means = values[:usable].reshape(n_batches, -1).mean(axis=1)
    se = float(batch_means.std(ddof=1) / np.sqrt(n_batches))

    line = (f"I = {fmt(mean)} +/- {fmt(se)} "
            f"(MC standard error, {samples} states, {mode}, "
            f"acceptance {chain.acceptance_rate:.3f})\n")
    sys.stdout.write(line)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {"value": mean, "standard_error": se, "samples": samples,
                   "mode": mode, "seed": cfg.adaptive.master_seed}
        (out_dir / "reference.json").write_text(
            json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_uniform(args) -> int:
    cfg = _with_seed(load_config(args.config), args.seed)
    if cfg.reference is None:
        raise ConfigError("uniform error table needs 'reference' in the config")
    model, posterior, target = _build_all(cfg)
    sizes = args.samples if args.samples else [10, 100, 1000]
    levels = args.level if args.level else list(
        range(1, model.ladder.n_levels + 1))
    for level in levels:
        if not 1 <= level <= model.ladder.n_levels:
            raise ConfigError(
                f"level {level} outside ladder 1..{model.ladder.n_levels}")
    n_runs = args.runs if args.runs is not None else 20

    label = ("# single-run absolute error" if n_runs == 1
             else f"# mean absolute error over {n_runs} runs")
    lines = [label, ",".join(["N"] + [f"level_{l}" for l in levels])]
    for n in sizes:
        row = [str(n)]
        for level in levels:
            _, err = run_uniform(model, posterior, target, n, level, 0, n_runs,
                                 cfg.adaptive.master_seed,
                                 reference=cfg.reference)
            row.append(fmt(err))
        lines.append(",".join(row))
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "uniform_errors.csv").write_text(text)
    return EXIT_OK


def _checkpoint_path(arg: str) -> Path:
    path = Path(arg)
    return path / "checkpoint.json" if path.is_dir() else path


def cmd_resume(args) -> int:
    path = _checkpoint_path(args.config)
    ck = read_checkpoint(path)
    cfg = parse_config(ck["config"], where=str(path))
    if ck["stopped_by"] is not None:
        sys.stdout.write(
            f"run already stopped ({ck['stopped_by']}); nothing to resume\n")
        sys.stdout.write(summarize(ck["config"], ck["records"],
                                   ck["stopped_by"], cfg.reference))
        return EXIT_OK
    out_dir = Path(args.out) if args.out else path.parent
    _run_to_dir(cfg, out_dir, initial=ck["surrogate"],
                resume_records=ck["records"],
                resume_solves=ck["solves_per_level"])
    return EXIT_OK


def cmd_report(args) -> int:
    path = _checkpoint_path(args.config)
    ck = read_checkpoint(path)
    reference = ck["config"].get("reference")
    sys.stdout.write(summarize(ck["config"], ck["records"], ck["stopped_by"],
                               reference))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voromc",
        description="Goal-adaptive Voronoi surrogates for Bayesian prediction",
        epilog="Set UQ_THREADS to cap worker parallelism.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", required=needs_config,
                       help="path to a JSON run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the master seed from the config")
        p.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("run", help="run the adaptive construction loop")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reference", help="long chain on exact or direct outputs")
    common(p)
    p.add_argument("--samples", type=int, default=None,
                   help="post-burn-in chain states (default 1000000)")
    p.add_argument("--level", type=_level_or_exact, default=None,
                   help="ladder level for direct evaluation, or 'exact'")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("uniform", help="fixed-size baseline error table")
    common(p)
    p.add_argument("--samples", type=_int_list, default=None,
                   help="comma-separated surrogate sizes (default 10,100,1000)")
    p.add_argument("--level", type=_int_list, default=None,
                   help="comma-separated levels (default: whole ladder)")
    p.add_argument("--runs", type=int, default=None,
                   help="replicates per table entry (default 20)")
    p.set_defaults(func=cmd_uniform)

    p = sub.add_parser("resume", help="continue a checkpointed run")
    common(p)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("report", help="summarize a run directory")
    common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvaluationError as exc:
        print(f"model failure: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
