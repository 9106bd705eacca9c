"""
Chunked Monte Carlo Execution
=============================
Work is split into fixed-size chunks whose random streams derive from
(master seed, chunk index) via numpy's SeedSequence hash; results are
concatenated in chunk order. The chunk plan depends only on the sample
count and chunk size, so values never depend on the number of workers.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Tuple

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 65_536
SEED_MASK = (1 << 64) - 1

# fn(size, rng) -> array whose first axis has length ``size``
ChunkFunction = Callable[[int, np.random.Generator], np.ndarray]


def default_chunk_size() -> int:
    """Chunk size from RECMAX_CHUNK_SIZE, falling back to the built-in default"""
    raw = os.getenv('RECMAX_CHUNK_SIZE')
    if not raw:
        return DEFAULT_CHUNK_SIZE
    try:
        size = int(raw)
    except ValueError:
        raise ValueError(f"RECMAX_CHUNK_SIZE must be an integer, got '{raw}'") from None
    if size < 1:
        raise ValueError("RECMAX_CHUNK_SIZE must be positive")
    return size


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for ``seed`` and an optional stream path."""
    entropy = [int(seed) & SEED_MASK] + [int(s) for s in stream]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def chunk_plan(n_samples: int, chunk_size: int) -> List[Tuple[int, int]]:
    """List of (chunk_index, chunk_length) covering ``n_samples``."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be positive, got {n_samples}")
    if chunk_size < 1:
        raise ValueError(f"chunk_size must be positive, got {chunk_size}")
    plan = []
    start = 0
    index = 0
    while start < n_samples:
        size = min(chunk_size, n_samples - start)
        plan.append((index, size))
        start += size
        index += 1
    return plan


def _run_chunk(args) -> np.ndarray:
    fn, seed, index, size, route = args
    rng = make_rng(seed, index, route) if route else make_rng(seed, index)
    return np.asarray(fn(size, rng))


def map_chunks(fn: ChunkFunction, n_samples: int, seed: int, workers: int = 1,
               chunk_size: int = None, route: int = 0) -> np.ndarray:
    """
    Evaluate ``fn`` over all chunks and concatenate results in chunk order.

    Args:
        fn: picklable callable ``fn(size, rng)`` returning per-sample values
        n_samples: total number of samples
        seed: master seed
        workers: number of worker processes (1 runs in-process)
        chunk_size: samples per chunk (defaults to RECMAX_CHUNK_SIZE)
        route: nonzero values select an independent family of chunk streams

    Returns:
        Per-chunk results concatenated along the first axis
    """
    chunk_size = chunk_size or default_chunk_size()
    tasks = [(fn, seed, index, size, route) for index, size in chunk_plan(n_samples, chunk_size)]
    if workers <= 1 or len(tasks) == 1:
        parts = [_run_chunk(task) for task in tasks]
    else:
        logger.debug("running %d chunks on %d workers", len(tasks), workers)
        with ProcessPoolExecutor(max_workers=workers) as executor:
            # map preserves submission order, which fixes the reduction order
            parts = list(executor.map(_run_chunk, tasks))
    return np.concatenate(parts, axis=0)
