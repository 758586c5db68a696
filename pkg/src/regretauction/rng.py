"""Counter-based uniform sampling with per-sample streams.

Every sample index owns a fixed, disjoint range of Philox counter blocks, so
the uniforms backing sample k depend only on (seed, k, width). Generating
samples in chunks over disjoint index ranges therefore concatenates to the
bit-identical output of a single serial run, which is what makes threaded
Monte Carlo reproducible regardless of worker count.
"""

from __future__ import annotations

import numpy as np

# Philox-4x64 emits exactly four doubles per counter block.
_DOUBLES_PER_BLOCK = 4


def blocks_per_sample(width: int) -> int:
    return max(1, -(-width // _DOUBLES_PER_BLOCK))


def uniform_block(seed: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniforms for samples [start, start+count), shape (count, width).

    Row k - start holds the draws owned by absolute sample index k.
    """
    if count == 0:
        return np.empty((0, width))
    nblocks = blocks_per_sample(width)
    bitgen = np.random.Philox(key=np.uint64(seed))
    bitgen.advance(start * nblocks)
    raw = np.random.Generator(bitgen).random(count * nblocks * _DOUBLES_PER_BLOCK)
    return raw.reshape(count, nblocks * _DOUBLES_PER_BLOCK)[:, :width]
