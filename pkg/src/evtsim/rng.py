"""Deterministic random sub-streams for reproducible Monte Carlo runs.

Every consumer of randomness derives its own generator from a master seed and
a key path (strings and nonnegative integers). Batches of replicates are split
into fixed-width blocks, each with its own sub-stream, so aggregate output is
bit-identical no matter how many workers consume the blocks.
"""

from __future__ import annotations

import hashlib

import numpy as np

# Fixed replicate block width; batch output must never depend on worker count,
# so this is a constant rather than a tunable.
CHUNK = 16384


def _key_ints(key) -> tuple[int, ...]:
    if isinstance(key, (bool,)):
        raise TypeError("booleans are not valid stream keys")
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("integer stream keys must be nonnegative")
        return (int(key),)
    if isinstance(key, str):
        digest = hashlib.sha256(key.encode("utf-8")).digest()
        return (
            int.from_bytes(digest[:8], "little"),
            int.from_bytes(digest[8:16], "little"),
        )
    raise TypeError(f"unsupported stream key type: {type(key).__name__}")


def substream(master_seed: int, *keys) -> np.random.Generator:
    """Independent generator for a (master seed, key path) pair.

    The same arguments always yield the same stream, regardless of what other
    streams have been drawn elsewhere in the process.
    """
    spawn: tuple[int, ...] = ()
    for key in keys:
        spawn = spawn + _key_ints(key)
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=spawn)
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(master_seed: int, label: str) -> int:
    """Stable 63-bit seed for a named sub-task (e.g. one experiment id)."""
    digest = hashlib.sha256(f"{int(master_seed)}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def chunk_bounds(n: int) -> list[tuple[int, int]]:
    """Fixed-width replicate blocks [start, stop) covering range(n)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]
