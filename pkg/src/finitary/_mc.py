"""Blocked Monte Carlo execution with reproducible per-block RNG streams.

Work is cut into fixed-size blocks, and block ``i`` always receives the
``i``-th child of the master ``SeedSequence``. Results therefore depend on
the seed and block size only, never on the number of workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, TypeVar

import numpy as np

from finitary.process import child_seeds

T = TypeVar("T")

BLOCK_SIZE = 1000


def block_counts(total: int, block_size: int = BLOCK_SIZE) -> list[int]:
    full, rest = divmod(total, block_size)
    return [block_size] * full + ([rest] if rest else [])


def run_blocks(
    func: Callable[[int, np.random.SeedSequence], T],
    total: int,
    seed: Any,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> list[T]:
    """Call ``func(count, seed_seq)`` once per block and return results in block order."""
    counts = block_counts(total, block_size)
    seeds = child_seeds(seed, len(counts))
    if workers <= 1 or len(counts) <= 1:
        return [func(c, s) for c, s in zip(counts, seeds)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, counts, seeds))
