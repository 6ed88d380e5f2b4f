"""Current-mode block evaluation: one 32-row x 4-bit partial MAC cycle.

Every selected cell sources a binary-weighted current onto a shared summing
node held at vcm by an ideal transimpedance stage, so the nibble shift-add
happens in the array itself and the output voltage is vcm + I_net * Rout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .device_models import FefetResistorCell, cell_current_curfe
from .errors import ConfigError
from .geometry import KIND_HIGH, KIND_LOW, NIBBLE_BITS, ROWS_PER_GROUP, SIGN_BIT_POSITION


@dataclass
class TiaConfig:
    """Ideal transimpedance stage: exact virtual ground, resistive feedback."""

    feedback_resistance: float = 15625.0  # ohm; +-256 current units map to +-0.4 V
    vcm: float = 0.5  # summing-node bias (V)
    v_rail_low: float = 0.0  # output clamp rails (V); defaults cover every
    v_rail_high: float = 1.25  # legal operand, so clamping only flags overdrive


@dataclass
class CurfeBlock:
    """One programmed 32-row block of current-mode cells."""

    kind: str  # KIND_HIGH or KIND_LOW
    stored_bits: np.ndarray  # (rows, 4) of {0,1}, LSB-first nibble bits
    deviations: np.ndarray  # (rows, 4) sampled Vth deviations (V)
    device: FefetResistorCell = field(default_factory=FefetResistorCell)

    def __post_init__(self):
        self.stored_bits = np.asarray(self.stored_bits, dtype=np.uint8)
        self.deviations = np.asarray(self.deviations, dtype=np.float64)
        if self.kind not in (KIND_HIGH, KIND_LOW):
            raise ConfigError(f"unknown block kind: {self.kind!r}")
        if self.stored_bits.shape != (ROWS_PER_GROUP, NIBBLE_BITS):
            raise ConfigError(f"stored_bits must be (32, 4), got {self.stored_bits.shape}")
        if self.deviations.shape != self.stored_bits.shape:
            raise ConfigError("deviations shape must match stored_bits")


@dataclass
class BlockResult:
    voltage: float
    net_current: float
    saturated: bool
    cell_currents: np.ndarray | None = None  # (rows, 4) when tracing


def block_on_off_currents(block: CurfeBlock) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell current (A) with the row selected (on) and deselected (off)."""
    rows = block.stored_bits.shape[0]
    on = np.empty((rows, NIBBLE_BITS))
    off = np.empty((rows, NIBBLE_BITS))
    for bit in range(NIBBLE_BITS):
        is_sign = block.kind == KIND_HIGH and bit == SIGN_BIT_POSITION
        on[:, bit] = cell_current_curfe(
            block.device, bit, is_sign, block.stored_bits[:, bit], 1, block.deviations[:, bit]
        )
        off[:, bit] = cell_current_curfe(
            block.device, bit, is_sign, block.stored_bits[:, bit], 0, block.deviations[:, bit]
        )
    return on, off


def evaluate_curfe_block(
    block: CurfeBlock,
    input_bits,
    tia: TiaConfig,
    collect_cells: bool = False,
) -> BlockResult:
    """Sum all cell currents for one input vector and read out the voltage.

    Returns the (possibly rail-clamped) output voltage and the signed net
    current.  Saturation is flagged rather than raised: a real stage rails.
    """
    x = np.asarray(input_bits, dtype=np.float64)
    if x.shape != (block.stored_bits.shape[0],):
        raise ConfigError(f"input_bits must have {block.stored_bits.shape[0]} entries")
    on, off = block_on_off_currents(block)
    cell = x[:, None] * on + (1.0 - x[:, None]) * off
    net = float(cell.sum())
    voltage = tia.vcm + net * tia.feedback_resistance
    saturated = voltage < tia.v_rail_low or voltage > tia.v_rail_high
    if saturated:
        voltage = min(max(voltage, tia.v_rail_low), tia.v_rail_high)
    return BlockResult(
        voltage=voltage,
        net_current=net,
        saturated=saturated,
        cell_currents=cell if collect_cells else None,
    )
