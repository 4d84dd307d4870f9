"""Counter-based random substreams.

Trials are grouped into fixed-size blocks. Block ``k`` of stream ``key``
draws from its own Philox generator keyed by ``(seed, key, k)``, so the
randomness of trial ``i`` never depends on how many trials were requested
or on the order in which blocks are evaluated.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np

BLOCK = 1 << 12


def block_generator(seed: int, key: tuple[int, ...], block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(*key, block))
    return np.random.Generator(np.random.Philox(ss))


def per_trial(
    seed: int,
    key: tuple[int, ...],
    n: int,
    draw: Callable[[np.random.Generator, int], np.ndarray],
    *,
    first_trial: int = 0,
) -> np.ndarray:
    """Concatenate ``draw(gen, BLOCK)`` over the blocks covering trials
    ``first_trial .. first_trial + n - 1``.

    ``draw`` must return an array whose leading axis has length ``BLOCK``;
    full blocks are always drawn, then sliced.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    stop = first_trial + n
    parts = []
    for block in range(first_trial // BLOCK, -(-stop // BLOCK)):
        chunk = draw(block_generator(seed, key, block), BLOCK)
        lo = max(first_trial - block * BLOCK, 0)
        hi = min(stop - block * BLOCK, BLOCK)
        parts.append(chunk[lo:hi])
    if not parts:
        return draw(block_generator(seed, key, 0), BLOCK)[:0]
    return np.concatenate(parts)


def uniforms(seed: int, key: tuple[int, ...], n: int, width: int = 1, *, first_trial: int = 0) -> np.ndarray:
    """``(n, width)`` array of U[0, 1) draws, row ``i`` owned by trial ``i``."""
    return per_trial(seed, key, n, lambda g, m: g.random((m, width)), first_trial=first_trial)


def fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % (1 << 63))
