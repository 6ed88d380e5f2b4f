"""Weight and input encoders for the signed/unsigned nibble cell layout.

Signed 8-bit weights split into a signed high nibble (bit 3 carries weight -8)
and an unsigned low nibble, so an 8-bit value w always satisfies
w = 16 * high + low.  Inputs are unrolled into LSB-first bit streams; the
digital accumulator owns the 2^i input weighting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EncodingError

MODE_SIGNED = "2cm"  # signed nibble readout, bit 3 weighted -8
MODE_UNSIGNED = "n2cm"  # plain unsigned nibble readout


def nibble_value(bits, mode: str) -> int:
    """Integer value of 4 LSB-first bits under the given readout mode."""
    b0, b1, b2, b3 = (int(b) for b in bits)
    top = -8 * b3 if mode == MODE_SIGNED else 8 * b3
    return b0 + 2 * b1 + 4 * b2 + top


@dataclass(frozen=True)
class WeightNibblePair:
    """An 8-bit signed weight as stored: two nibbles of LSB-first bits."""

    high_bits: tuple[int, int, int, int]  # weight bits 4..7, index 3 is the sign cell
    low_bits: tuple[int, int, int, int]  # weight bits 0..3
    source_value: int

    @property
    def high_value(self) -> int:
        return nibble_value(self.high_bits, MODE_SIGNED)

    @property
    def low_value(self) -> int:
        return nibble_value(self.low_bits, MODE_UNSIGNED)


@dataclass(frozen=True)
class NibbleValue:
    mode: str
    value: int


@dataclass(frozen=True)
class InputBitStream:
    """Unsigned input unrolled LSB-first for bit-serial application."""

    bits: tuple[int, ...]
    precision: int
    source_value: int


def encode_weight_8b(w: int) -> WeightNibblePair:
    if not -128 <= w <= 127:
        raise EncodingError(f"8-bit signed weight out of range: {w}")
    u = w & 0xFF  # two's complement byte
    low = tuple((u >> j) & 1 for j in range(4))
    high = tuple((u >> (j + 4)) & 1 for j in range(4))
    return WeightNibblePair(high_bits=high, low_bits=low, source_value=w)


def decode_weight(pair: WeightNibblePair) -> int:
    return 16 * pair.high_value + pair.low_value


def encode_weight_4b(w: int) -> NibbleValue:
    if not -8 <= w <= 7:
        raise EncodingError(f"4-bit signed weight out of range: {w}")
    return NibbleValue(mode=MODE_SIGNED, value=w)


def weight_4b_bits(value: NibbleValue) -> tuple[int, int, int, int]:
    """LSB-first stored bits of a signed nibble (two's complement)."""
    u = value.value & 0xF
    return tuple((u >> j) & 1 for j in range(4))


def encode_input(x: int, m: int) -> InputBitStream:
    if not 1 <= m <= 8:
        raise EncodingError(f"input precision must be 1..8, got {m}")
    if not 0 <= x < (1 << m):
        raise EncodingError(f"{m}-bit unsigned input out of range: {x}")
    bits = tuple((x >> i) & 1 for i in range(m))
    return InputBitStream(bits=bits, precision=m, source_value=x)


def decode_input(stream: InputBitStream) -> int:
    return sum(b << i for i, b in enumerate(stream.bits))


def input_bit_planes(x, m: int) -> np.ndarray:
    """Bit planes of an unsigned input vector, shape (m, len(x)), LSB first."""
    x = np.asarray(x, dtype=np.int64)
    if m < 1 or m > 8:
        raise EncodingError(f"input precision must be 1..8, got {m}")
    if x.min(initial=0) < 0 or x.max(initial=0) >= (1 << m):
        raise EncodingError(f"input vector exceeds {m}-bit unsigned range")
    return ((x[None, :] >> np.arange(m, dtype=np.int64)[:, None]) & 1).astype(np.uint8)


def weight_matrix_nibble_bits(weights) -> tuple[np.ndarray, np.ndarray]:
    """Stored-bit planes for a signed 8-bit weight matrix.

    Returns (high_bits, low_bits), each shaped weights.shape + (4,), LSB-first
    within the nibble.
    """
    w = np.asarray(weights, dtype=np.int64)
    if w.size and (w.min() < -128 or w.max() > 127):
        raise EncodingError("weight matrix exceeds signed 8-bit range")
    u = w & 0xFF
    shifts = np.arange(4, dtype=np.int64)
    low = ((u[..., None] >> shifts) & 1).astype(np.uint8)
    high = ((u[..., None] >> (shifts + 4)) & 1).astype(np.uint8)
    return high, low


def nibble_bits_to_values(bits: np.ndarray, mode: str) -> np.ndarray:
    """Vectorized nibble readback; `bits` has the nibble on its last axis."""
    b = np.asarray(bits, dtype=np.int64)
    top = -8 if mode == MODE_SIGNED else 8
    return b[..., 0] + 2 * b[..., 1] + 4 * b[..., 2] + top * b[..., 3]


def write_int_matrix(path, matrix, precision: int) -> None:
    """Write an integer matrix as headered CSV: `rows,cols,precision` + rows."""
    m = np.asarray(matrix, dtype=np.int64)
    if m.ndim != 2:
        raise EncodingError(f"expected a 2-d matrix, got shape {m.shape}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{m.shape[0]},{m.shape[1]},{precision}\n")
        for row in m:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def read_int_matrix(path) -> tuple[np.ndarray, int]:
    """Read a headered CSV matrix; returns (matrix, precision)."""
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 3:
            raise EncodingError(f"{path}: header must be rows,cols,precision")
        rows, cols, precision = (int(v) for v in header)
        data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2)
    if data.shape != (rows, cols):
        raise EncodingError(f"{path}: body shape {data.shape} != header ({rows}, {cols})")
    limit = 1 << precision
    if data.size and (data.min() < -(limit // 2) or data.max() >= limit):
        raise EncodingError(f"{path}: values exceed declared {precision}-bit range")
    return data, precision
