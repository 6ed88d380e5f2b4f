"""Counter-based deterministic Gaussian draws for per-cell Vth variation.

A SplitMix64-style finalizer hashes (seed, row, col) into two uniform 64-bit
words, and a Box-Muller transform maps those to one normal deviate.  There is
no generator state: the draw for a cell depends only on its key, so
programming order, chunking, and parallel evaluation cannot change any
sampled value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX_A = np.uint64(0xBF58476D1CE4E5B9)
_MIX_B = np.uint64(0x94D049BB133111EB)
_MASK = 0xFFFFFFFFFFFFFFFF


def _mix64(words: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over a uint64 array."""
    z = np.asarray(words, dtype=np.uint64).copy()
    with np.errstate(over="ignore"):
        z += _GOLDEN
        z ^= z >> np.uint64(30)
        z *= _MIX_A
        z ^= z >> np.uint64(27)
        z *= _MIX_B
        z ^= z >> np.uint64(31)
    return z


def _cell_words(seed: int, rows: np.ndarray, cols: np.ndarray, stream: int) -> np.ndarray:
    key = _mix64(np.asarray([seed & _MASK], dtype=np.uint64))[0]
    counter = (rows.astype(np.uint64) << np.uint64(32)) | cols.astype(np.uint64)
    with np.errstate(over="ignore"):
        base = _mix64(counter ^ key)
        base += np.uint64((stream + 1) & _MASK) * _GOLDEN
    return _mix64(base)


def gaussian_for_cells(seed: int, rows, cols, sigma: float) -> np.ndarray:
    """Gaussian(0, sigma) deviate for every (row, col) pair, broadcast.

    Pure function of its arguments; identical keys always reproduce
    identical values.
    """
    if sigma < 0:
        raise ConfigError(f"sigma must be non-negative, got {sigma}")
    r, c = np.broadcast_arrays(np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))
    if sigma == 0.0:
        return np.zeros(r.shape, dtype=np.float64)
    w1 = _cell_words(seed, r, c, stream=0)
    w2 = _cell_words(seed, r, c, stream=1)
    # top 53 bits -> uniform in (0, 1), offset keeps log() finite
    u1 = ((w1 >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    u2 = ((w2 >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return sigma * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class VthSample:
    """One sampled threshold-voltage deviation with its replay key."""

    deviation: float  # volts
    seed: int
    row: int
    col: int


def sample_vth(seed: int, coords: tuple[int, int], sigma: float) -> VthSample:
    """Deterministic per-cell Vth deviation draw, keyed by (seed, row, col)."""
    row, col = coords
    value = float(gaussian_for_cells(seed, np.int64(row), np.int64(col), sigma))
    return VthSample(deviation=value, seed=seed, row=row, col=col)


def derive_seed(seed: int, index: int) -> int:
    """Child seed for trial/worker lineages; stable and collision-resistant."""
    with np.errstate(over="ignore"):
        word = _mix64(np.asarray([seed & _MASK], dtype=np.uint64))
        word += np.uint64((index + 1) & _MASK) * _GOLDEN
    return int(_mix64(word)[0])
