"""Run persistence: convergence tables, checkpoints, and summaries.

Every float is serialized with 17 significant digits so that reading a file
back reproduces the exact binary value. Checkpoints are versioned JSON with
explicit field names; a reader that sees an unknown version refuses rather
than guessing.
"""
from __future__ import annotations

import json
import os
from pathlib import Path

from .driver import IterationRecord
from .surrogate import Surrogate

__all__ = [
    "CheckpointError",
    "CHECKPOINT_VERSION",
    "fmt",
    "convergence_lines",
    "write_convergence_csv",
    "record_to_dict",
    "record_from_dict",
    "write_checkpoint",
    "read_checkpoint",
    "summarize",
]

FLOAT_FMT = "%.17g"
CHECKPOINT_VERSION = 1


class CheckpointError(Exception):
    """Unreadable, corrupt, or version-incompatible checkpoint."""


def fmt(x) -> str:
    """Render a float with enough digits to round-trip exactly."""
    return FLOAT_FMT % float(x)


def convergence_lines(records, reference=None) -> list:
    """Convergence table as CSV lines, one row per iteration record.

    Columns: iteration, cumulative solves per ladder level, the plain and
    enhanced integral estimates, their signed difference, and, when a
    reference value is supplied, the absolute error of the enhanced estimate.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to tabulate")
    n_levels = len(records[0].solves_per_level)
    header = ["iteration"]
    header += [f"level_{l}" for l in range(1, n_levels + 1)]
    header += ["I_N", "I_hat_N", "I_E"]
    if reference is not None:
        header.append("error_vs_reference")
    lines = [",".join(header)]
    for rec in records:
        if len(rec.solves_per_level) != n_levels:
            raise ValueError("records disagree on the number of levels")
        row = [str(int(rec.iteration))]
        row += [str(int(c)) for c in rec.solves_per_level]
        row += [fmt(rec.integral_plain), fmt(rec.integral_enhanced),
                fmt(rec.error_estimate)]
        if reference is not None:
            row.append(fmt(abs(rec.integral_enhanced - reference)))
        lines.append(",".join(row))
    return lines


def write_convergence_csv(path, records, reference=None) -> None:
    text = "\n".join(convergence_lines(records, reference)) + "\n"
    Path(path).write_text(text)


def record_to_dict(rec: IterationRecord) -> dict:
    return {
        "iteration": int(rec.iteration),
        "solves_per_level": [int(c) for c in rec.solves_per_level],
        "integral_plain": rec.integral_plain,
        "integral_enhanced": rec.integral_enhanced,
        "error_estimate": rec.error_estimate,
        "global_indicator": rec.global_indicator,
        "n_cells": int(rec.n_cells),
        "refinements": dict(rec.refinements),
        "wall_time": rec.wall_time,
    }


def record_from_dict(d: dict) -> IterationRecord:
    return IterationRecord(
        iteration=int(d["iteration"]),
        solves_per_level=tuple(int(c) for c in d["solves_per_level"]),
        integral_plain=float(d["integral_plain"]),
        integral_enhanced=float(d["integral_enhanced"]),
        error_estimate=float(d["error_estimate"]),
        global_indicator=float(d["global_indicator"]),
        n_cells=int(d["n_cells"]),
        refinements={k: int(v) for k, v in d["refinements"].items()},
        wall_time=float(d["wall_time"]),
    )


def write_checkpoint(path, config: dict, records, surrogate: Surrogate,
                     solves=None, stopped_by=None) -> None:
    """Persist the full run state as versioned JSON (atomic replace).

    ``solves`` is the cumulative per-level solve count as of the stored
    surrogate (post-refinement); it defaults to the last record's counts,
    which is only correct when the run stopped there. The RNG needs no saved
    state: every stream is derived from the master seed plus the iteration
    counter, both of which the payload carries.
    """
    if solves is None:
        solves = records[-1].solves_per_level if records else ()
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": config,
        "iteration": int(records[-1].iteration) if records else -1,
        "rng": {"kind": "derived",
                "master_seed": config["adaptive"]["master_seed"]},
        "solves_per_level": [int(c) for c in solves],
        "records": [record_to_dict(r) for r in records],
        "surrogate": surrogate.to_dict(),
        "stopped_by": stopped_by,
    }
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=1, sort_keys=True))
    os.replace(tmp, path)


def read_checkpoint(path) -> dict:
    """Load a checkpoint, returning reconstructed records and surrogate.

    Raises CheckpointError on I/O failure, corruption, missing fields, or a
    version this reader does not understand (the message names both the file
    version and the supported one).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint: {exc}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(
            f"{path}:{exc.lineno}: corrupt checkpoint: {exc.msg}") from exc
    if not isinstance(payload, dict) or "version" not in payload:
        raise CheckpointError(f"{path}: corrupt checkpoint: no version field")
    version = payload["version"]
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {version} is not supported; "
            f"this build reads version {CHECKPOINT_VERSION}")
    try:
        return {
            "version": version,
            "config": payload["config"],
            "solves_per_level": tuple(int(c) for c in payload["solves_per_level"]),
            "records": tuple(record_from_dict(d) for d in payload["records"]),
            "surrogate": Surrogate.from_dict(payload["surrogate"]),
            "stopped_by": payload["stopped_by"],
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint: {exc!r}") from exc


def summarize(config: dict, records, stopped_by=None, reference=None) -> str:
    """Human-readable run summary ending with the final enhanced estimate."""
    records = list(records)
    lines = [
        f"problem          : {config.get('problem', '?')}",
        f"model            : {config['model']['name']}",
        f"target           : {config['target']['name']} ({config['target']['mode']})",
    ]
    if not records:
        lines.append("iterations       : 0 (no records)")
        return "\n".join(lines) + "\n"
    last = records[-1]
    per_level = ", ".join(
        f"L{l}={c}" for l, c in enumerate(last.solves_per_level, start=1))
    lines += [
        f"iterations       : {len(records)} (k = 0 .. {last.iteration})",
        f"cells            : {last.n_cells}",
        f"solves per level : {per_level}",
        f"stopped by       : {stopped_by if stopped_by else 'still running'}",
        f"global indicator : {fmt(last.global_indicator)}",
        f"I_N              : {fmt(last.integral_plain)}",
        f"I_E              : {fmt(last.error_estimate)}",
    ]
    if reference is not None:
        lines.append(
            f"error vs ref     : {fmt(abs(last.integral_enhanced - reference))}")
    lines.append(f"final I_hat_N    : {fmt(last.integral_enhanced)}")
    return "\n".join(lines) + "\n"
