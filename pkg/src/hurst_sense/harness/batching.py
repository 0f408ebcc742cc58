"""Replication batching with a fixed chunk layout.

Chunks are cut from the replication index alone, so the numbers produced do not
depend on how many worker threads run them. ``HURST_SENSE_THREADS`` overrides the
worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .seeds import seed_block

ENV_THREADS = "HURST_SENSE_THREADS"


def n_threads():
    raw = os.environ.get(ENV_THREADS)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    return max(1, os.cpu_count() or 1)


def map_replications(fn, root, n_mc, chunk=256):
    """Run ``fn(seeds)`` on consecutive seed chunks and concatenate results in index order.

    ``fn`` returns an array (or tuple of arrays) with replications on axis 0.
    """
    starts = list(range(0, n_mc, chunk))
    blocks = [seed_block(root, s, min(chunk, n_mc - s)) for s in starts]
    workers = min(n_threads(), len(blocks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(fn, blocks))
    else:
        parts = [fn(b) for b in blocks]
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)
