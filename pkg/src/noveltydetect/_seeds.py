"""Deterministic derivation of child seeds from a master seed."""

from __future__ import annotations

import numpy as np


def child_seed(master: int, *keys: int) -> int:
    """Derive a 64-bit seed from a master seed and an integer key path.

    Independent of call order, so concurrent workers can derive their own
    streams and still reproduce single-threaded runs exactly.
    """
    ss = np.random.SeedSequence([int(master)] + [int(k) for k in keys])
    return int(ss.generate_state(1, dtype=np.uint64)[0])
