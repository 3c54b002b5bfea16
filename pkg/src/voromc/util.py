"""Shared helpers: deterministic seeding and optional thread fan-out."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["seeded_rng", "subseed", "parallel_map", "worker_count"]

# Fixed purpose codes keep derived streams distinct and reproducible.
PURPOSE = {
    "init": 1,
    "emulation": 2,
    "chain": 3,
    "proposals": 4,
    "uniform": 5,
    "reference": 6,
}


def subseed(master_seed: int, purpose: str, *key: int) -> np.random.SeedSequence:
    """Derive a reproducible SeedSequence from a master seed and a purpose key.

    The same (master_seed, purpose, key) always yields the same stream, so a
    resumed run regenerates exactly the randomness an uninterrupted run used.
    """
    if purpose not in PURPOSE:
        raise ValueError(f"unknown rng purpose {purpose!r}")
    return np.random.SeedSequence([int(master_seed), PURPOSE[purpose], *map(int, key)])


def seeded_rng(master_seed: int, purpose: str, *key: int) -> np.random.Generator:
    return np.random.default_rng(subseed(master_seed, purpose, *key))


def worker_count() -> int:
    """Worker cap from the UQ_THREADS environment variable (default 1)."""
    raw = os.environ.get("UQ_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"UQ_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def parallel_map(fn, items):
    """Order-preserving map over independent work items.

    Fans out across threads when UQ_THREADS > 1; falls back to a plain map
    otherwise. Results are returned in input order either way.
    """
    items = list(items)
    n = worker_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
