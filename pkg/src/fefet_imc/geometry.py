"""Fixed macro geometry and the weight-to-column mapping.

The macro is a 128 x 128 cell grid split into 16 banks of 8 physical columns.
Within a bank, columns 0..3 hold the unsigned low nibble (bit order LSB
first) and columns 4..7 hold the signed high nibble, so the physical column
index equals bank * 8 + weight-bit index.  Rows are activated in four groups
of 32; one high block and one low block are live per bank per cycle.
"""

from __future__ import annotations

from .errors import ConfigError

ROWS = 128
COLS = 128
BANKS = 16
ROWS_PER_GROUP = 32
GROUPS = ROWS // ROWS_PER_GROUP
NIBBLE_BITS = 4

KIND_HIGH = "high"  # signed nibble block; bit 3 is the sign cell
KIND_LOW = "low"  # unsigned nibble block
SIGN_BIT_POSITION = 3  # nibble position of the sign cell in high blocks

KIND_CURRENT = "current"  # resistor-ladder cells summed on a transimpedance stage
KIND_CHARGE = "charge"  # saturation cells integrated on bitline capacitors


def physical_column(bank: int, kind: str, bit: int) -> int:
    """Physical column of a nibble bit; mirrors the adjacent-column layout."""
    if kind == KIND_LOW:
        return bank * 8 + bit
    if kind == KIND_HIGH:
        return bank * 8 + 4 + bit
    raise ConfigError(f"unknown block kind: {kind!r}")


def check_geometry(rows: int, cols: int, banks: int, rows_per_group: int) -> None:
    """Reject geometries the bank/block layout cannot express."""
    if rows != ROWS:
        raise ConfigError(f"rows must be {ROWS}, got {rows}")
    if cols != COLS:
        raise ConfigError(f"cols must be {COLS}, got {cols}")
    if banks != BANKS:
        raise ConfigError(f"banks must be {BANKS}, got {banks}")
    if rows_per_group != ROWS_PER_GROUP:
        raise ConfigError(f"rows_per_group must be {ROWS_PER_GROUP}, got {rows_per_group}")
