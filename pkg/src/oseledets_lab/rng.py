"""Deterministic randomness derivation.

Every random draw in the package flows from a single 64-bit run seed
through the counter-based, splittable Philox generator.  Independent
streams are derived by hashing the run seed together with a purpose tag
(a short string) and optional integer indices using splitmix64; the mixed
words become the Philox key.  Derivation is pure arithmetic, so any
(seed, tag, indices) tuple names the same stream in every process, for
any thread count, on every platform.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state; return (new_state, output word)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, (z ^ (z >> 31)) & _MASK


def derive_key(seed: int, tag: str, *indices: int) -> tuple[int, int]:
    """Mix a run seed, a purpose tag, and indices into a 128-bit Philox key."""
    state = int(seed) & _MASK
    for byte in tag.encode("utf-8"):
        state, _ = _splitmix64(state ^ byte)
    for idx in indices:
        state, _ = _splitmix64(state ^ (int(idx) & _MASK))
    state, k0 = _splitmix64(state)
    _, k1 = _splitmix64(state)
    return k0, k1


def stream(seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Return the Philox generator for (seed, tag, indices)."""
    k0, k1 = derive_key(seed, tag, *indices)
    return np.random.Generator(np.random.Philox(key=np.array([k0, k1], dtype=np.uint64)))


def random_orthonormal(seed: int, tag: str, dim: int, *indices: int) -> np.ndarray:
    """Deterministic Haar-ish random orthonormal dim x dim frame."""
    g = stream(seed, tag, *indices)
    m = g.standard_normal((dim, dim))
    q, r = np.linalg.qr(m)
    sign = np.sign(np.diag(r))
    sign[sign == 0] = 1.0
    return q * sign
