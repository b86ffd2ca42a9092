"""Deterministic random streams for the Monte-Carlo harness.

Streams are Philox-4x64-10 counter generators keyed by a SplitMix64 hash of
``(base_seed, stream tag, cell coordinates...)``, so every replication owns an
independent stream regardless of execution order or parallelism. Standard
normals come from the inverse normal CDF applied to open-interval uniforms
built from the raw 64-bit counter output, which keeps the values identical
across platforms and library versions.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

__all__ = ["derive_key", "subkey", "uniforms", "normals", "haar_orthogonal"]

_MASK64 = (1 << 64) - 1

# stream tags keep unrelated consumers of one base seed independent
TAG_DATA = 1
TAG_CALIBRATION = 2


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_key(base_seed: int, *fields: int) -> int:
    """128-bit Philox key from a base seed and integer stream coordinates.

    Each field is absorbed with one SplitMix64 round; the two output words are
    consecutive states of the absorbed chain.
    """
    acc = _splitmix64(int(base_seed) & _MASK64)
    for f in fields:
        acc = _splitmix64(acc ^ (int(f) & _MASK64))
    hi = _splitmix64(acc ^ 0xA5A5A5A5A5A5A5A5)
    return acc | (hi << 64)


def subkey(key: int, tag: int) -> int:
    """Independent child stream of an existing 128-bit key."""
    return derive_key(key & _MASK64, key >> 64, tag)


def _raw(key: int, count: int) -> np.ndarray:
    return np.random.Philox(key=key).random_raw(count)


def uniforms(key: int, shape) -> np.ndarray:
    """Open-interval (0, 1) doubles from the raw counter stream."""
    shape = np.atleast_1d(np.asarray(shape, dtype=int))
    count = int(np.prod(shape))
    raw = _raw(key, count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return u.reshape(tuple(shape))


def normals(key: int, shape) -> np.ndarray:
    """Standard normals via the inverse-CDF transform (scipy's ndtri)."""
    return ndtri(uniforms(key, shape))


def haar_orthogonal(key: int, p: int) -> np.ndarray:
    """Seed-deterministic Haar-distributed orthogonal p-by-p matrix.

    QR of a Gaussian matrix with the sign of R's diagonal folded into Q, which
    makes the factorization (and hence the sample) unique.
    """
    z = normals(key, (p, p))
    q, r = np.linalg.qr(z)
    return q * np.sign(np.diag(r))
