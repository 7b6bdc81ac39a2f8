"""Counter-based random streams keyed by (seed, stream id, ...)."""

from __future__ import annotations

import numpy as np

from .errors import ParameterError


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent Philox generator for the stream identified by ``keys``.

    The same ``(seed, keys)`` pair always gives the same stream, whatever
    order streams are created in, so trials and layers can be sampled in
    parallel without changing results.
    """
    seed = int(seed)
    if seed < 0 or any(int(k) < 0 for k in keys):
        raise ParameterError("seeds and stream ids must be non-negative integers")
    ss = np.random.SeedSequence([seed, *[int(k) for k in keys]])
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, *keys: int) -> int:
    """Derive a 63-bit integer seed for a sub-task."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(2, dtype=np.uint32).astype(np.uint64) @ np.array([1 << 31, 1], dtype=np.uint64))
