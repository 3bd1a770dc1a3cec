"""Seed derivation and deterministic parallel mapping.

Every random decision in the package flows through :func:`rng_at`, which
maps ``(master seed, integer path)`` to an independent generator.  Because
the path, not the call order, identifies the stream, results are identical
no matter how work is scheduled across workers.
"""

from __future__ import annotations

import concurrent.futures
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# Stream tags keep unrelated consumers of the same master seed apart.
TAG_SUBSAMPLE = 1
TAG_TREE = 2
TAG_ANCHORS = 3
TAG_TRANSFORM = 4
TAG_PERMUTE = 5
TAG_SWAP = 6
TAG_SCENARIO = 7
TAG_STRATA = 8
TAG_GRID = 9


def rng_at(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream addressed by ``(seed, *path)``.

    Uses ``SeedSequence`` spawn keys, so distinct paths give statistically
    independent streams and the mapping is stable across processes.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(path)))


def parallel_map(
    fn: Callable[[T], R],
    items: Sequence[T],
    workers: int = 1,
) -> list[R]:
    """Map ``fn`` over ``items``, preserving order.

    With ``workers > 1`` runs in a process pool; ``fn`` and the items must
    be picklable.  Output order (and therefore every downstream reduction)
    is independent of the worker count.
    """
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (workers * 4))))


def chunk_indices(total: int, chunks: int) -> list[range]:
    """Split ``range(total)`` into at most ``chunks`` contiguous ranges."""
    chunks = max(1, min(chunks, total))
    bounds = np.linspace(0, total, chunks + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(chunks) if bounds[i] < bounds[i + 1]]


def freeze(arr: np.ndarray) -> np.ndarray:
    """Return ``arr`` marked read-only (shared, not copied)."""
    arr.setflags(write=False)
    return arr


def as_iterable_len(items: Iterable[T]) -> list[T]:
    return list(items)
