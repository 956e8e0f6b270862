"""Platform-stable randomness and seed derivation.

All stochastic inputs (instance couplings, initialization draws) are produced
by a fixed, documented pipeline so that serialized artifacts are byte-identical
across platforms and library versions:

* bit source: Philox4x64 counter-based generator, keyed by a 64-bit seed;
* uniforms: the top 53 bits of each raw 64-bit word, ``u = (raw >> 11) * 2**-53``;
* Gaussians: Box-Muller over consecutive uniform pairs, with ``u1`` shifted
  into ``(0, 1]`` to keep the logarithm finite.

Only the raw Philox stream is consumed from numpy; the uniform and normal
transforms are implemented here because numpy reserves the right to change its
own distribution algorithms between releases.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = (1 << 64) - 1
_INV_2_53 = 2.0**-53


def derive_seed(*parts: object) -> int:
    """Collapse a tuple of labels into a stable 64-bit seed via SHA-256."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class StableRng:
    """Deterministic uniform/normal sampler over a Philox bit stream."""

    def __init__(self, seed: int):
        self._bits = np.random.Philox(key=seed & _U64)

    def raw(self, size: int) -> np.ndarray:
        return self._bits.random_raw(size).astype(np.uint64, copy=False)

    def uniform(self, size: int) -> np.ndarray:
        """Uniform doubles in [0, 1)."""
        return (self.raw(size) >> np.uint64(11)) * _INV_2_53

    def uniform_range(self, low: float, high: float, size: int) -> np.ndarray:
        return low + (high - low) * self.uniform(size)

    def normal(self, size: int, scale: float = 1.0) -> np.ndarray:
        """Gaussian draws via Box-Muller; two uniforms per output pair."""
        n_pairs = (size + 1) // 2
        u1 = ((self.raw(n_pairs) >> np.uint64(11)) + np.uint64(1)) * _INV_2_53
        u2 = self.uniform(n_pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * n_pairs)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return scale * out[:size]
