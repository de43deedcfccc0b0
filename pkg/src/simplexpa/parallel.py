"""Seed-per-chunk fan-out whose results do not depend on the thread count."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor

import numpy as np

DEFAULT_CHUNK = 1 << 16


def replicate_rng(master_seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for ``(master_seed, replicate)``."""
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate),)))


def chunk_bounds(total: int, chunk: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    return [(s, min(s + chunk, total)) for s in range(0, total, chunk)]


def child_sequences(rng: np.random.Generator, count: int) -> list[np.random.SeedSequence]:
    """``count`` seed sequences drawn from one call on ``rng``."""
    root = np.random.SeedSequence(int(rng.integers(0, 2**63)))
    return root.spawn(count)


def ordered_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; order kept."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as ex:
        return list(ex.map(fn, items))
