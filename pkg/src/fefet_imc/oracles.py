"""Exact integer references every equivalence test is checked against.

These are deliberately independent of the analog modules: `exact_dot` is a
plain integer dot product, `exact_dot_bit_expanded` re-derives the same
number from the raw two's-complement bits, and `quantized_dot` replays the
group/nibble/bit-serial pipeline with only ADC quantization applied, so
device effects can be separated from conversion effects.
"""

from __future__ import annotations

import numpy as np

from .encoding import MODE_SIGNED, MODE_UNSIGNED
from .errors import ConfigError


def exact_dot(x, w) -> int:
    """Plain integer dot product of unsigned inputs and signed weights."""
    xv = np.asarray(x, dtype=np.int64)
    wv = np.asarray(w, dtype=np.int64)
    if xv.shape != wv.shape:
        raise ConfigError(f"length mismatch: {xv.shape} vs {wv.shape}")
    return int(np.dot(xv, wv))


def exact_dot_bit_expanded(x, w, m: int = 8) -> int:
    """Same dot product, re-derived bitwise as a double-entry check.

    Expands each product into sign-bit, high-magnitude and low-nibble terms
    over the input bit planes, sharing no code with `exact_dot`.
    """
    total = 0
    for xv, wv in zip(np.asarray(x, dtype=np.int64), np.asarray(w, dtype=np.int64)):
        u = int(wv) & 0xFF
        y = [(u >> j) & 1 for j in range(8)]
        for i in range(m):
            xi = (int(xv) >> i) & 1
            if not xi:
                continue
            total += -y[7] * (1 << (i + 7))
            for j in range(4, 7):
                total += y[j] * (1 << (i + j))
            for j in range(0, 4):
                total += y[j] * (1 << (i + j))
    return total


def quantize_value(value: int, mode: str, bits: int, rows: int) -> int:
    """Value-axis quantizer semantics shared with the readout contract.

    Coded independently from the readout module so the two routes can be
    compared; unsigned spreads 2^bits - 1 steps over [0, 15 * rows], signed
    anchors code 0 at value 0 with step 8 * rows / 2^(bits - 1).
    """
    if mode == MODE_UNSIGNED:
        scale = ((1 << bits) - 1) / (15 * rows)
        code_lo, code_hi = 0, (1 << bits) - 1
    elif mode == MODE_SIGNED:
        scale = (1 << (bits - 1)) / (8 * rows)
        code_lo, code_hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    else:
        raise ConfigError(f"unknown ADC mode: {mode!r}")
    code = round(value * scale)
    code = min(max(code, code_lo), code_hi)
    return round(code / scale)


def quantized_dot(x, w, adc_bits: int, rows_per_group: int = 32, m: int = 8) -> int:
    """Ideal-pipeline dot product with only ADC quantization, no device noise.

    Splits each weight into nibbles, walks input bits and 32-row groups like
    the macro does, quantizes each group's nibble sums, and accumulates with
    the same shifts.  With lossless resolution this equals `exact_dot`.
    """
    xv = np.asarray(x, dtype=np.int64)
    wv = np.asarray(w, dtype=np.int64)
    if xv.shape != wv.shape:
        raise ConfigError(f"length mismatch: {xv.shape} vs {wv.shape}")
    high = ((wv >> 4) & 0xF).astype(np.int64)
    high = np.where(high >= 8, high - 16, high)  # signed nibble
    low = (wv & 0xF).astype(np.int64)
    n = xv.shape[0]
    total = 0
    for i in range(m):
        xb = (xv >> i) & 1
        for start in range(0, n, rows_per_group):
            sl = slice(start, min(start + rows_per_group, n))
            h = int(np.dot(xb[sl], high[sl]))
            l = int(np.dot(xb[sl], low[sl]))
            partial = 16 * quantize_value(h, MODE_SIGNED, adc_bits, rows_per_group)
            partial += quantize_value(l, MODE_UNSIGNED, adc_bits, rows_per_group)
            total += partial << i
    return total
