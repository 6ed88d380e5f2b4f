"""Charge-mode block evaluation: precharge, timed evaluate, charge share.

Each of the four bitlines carries an equal capacitor precharged to v_pre.
During the evaluation window every selected cell moves its bitline by a
binary-weighted dV (up for the sign column, down for the rest), and shorting
the four capacitors afterwards averages the bitline voltages, which is the
divide-by-four that completes the nibble shift-add.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .device_models import MlcFefetCell, cell_delta_v_chgfe
from .errors import ConfigError
from .geometry import KIND_HIGH, KIND_LOW, NIBBLE_BITS, ROWS_PER_GROUP, SIGN_BIT_POSITION


@dataclass
class ChgfeBlock:
    """One programmed 32-row block of charge-mode cells plus its bitline bank."""

    kind: str  # KIND_HIGH or KIND_LOW
    stored_bits: np.ndarray  # (rows, 4) of {0,1}, LSB-first nibble bits
    deviations: np.ndarray  # (rows, 4) sampled Vth deviations (V)
    device: MlcFefetCell = field(default_factory=MlcFefetCell)
    bl_capacitance: float = 50e-15  # F, equal on all four bitlines
    v_pre: float = 1.5  # precharge level (V)
    t_pre: float = 1e-9  # s
    t_eval: float = 0.5e-9  # s
    v_supply: float = 2.0  # charge-path rail used only for range flagging (V)

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
class BlState:
    """Voltages of the four bitlines, one per nibble position."""

    voltages: np.ndarray  # (4,) volts
    out_of_range: bool = False


def precharge(block: ChgfeBlock) -> BlState:
    """Reset all four bitlines to v_pre; independent of cell contents."""
    return BlState(voltages=np.full(NIBBLE_BITS, block.v_pre, dtype=np.float64))


def block_on_off_delta_v(block: ChgfeBlock) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell bitline dV (V) with the row selected (on) and deselected (off)."""
    rows = block.stored_bits.shape[0]
    on = np.empty((rows, NIBBLE_BITS))
    off = np.empty((rows, NIBBLE_BITS))
    for bit in range(NIBBLE_BITS):
        is_sign = block.kind == KIND_HIGH and bit == SIGN_BIT_POSITION
        on[:, bit] = cell_delta_v_chgfe(
            block.device, bit, is_sign, block.stored_bits[:, bit], 1,
            block.deviations[:, bit], block.t_eval, block.bl_capacitance,
        )
        off[:, bit] = cell_delta_v_chgfe(
            block.device, bit, is_sign, block.stored_bits[:, bit], 0,
            block.deviations[:, bit], block.t_eval, block.bl_capacitance,
        )
    return on, off


def evaluate_bls(block: ChgfeBlock, input_bits, state: BlState) -> BlState:
    """Apply one input vector for the evaluation window.

    Each bitline accumulates the dV of its own bit column; out-of-rail
    voltages are clamped and flagged.
    """
    x = np.asarray(input_bits, dtype=np.float64)
    if x.shape != (block.stored_bits.shape[0],):
        raise ConfigError(f"input_bits must have {block.stored_bits.shape[0]} entries")
    on, off = block_on_off_delta_v(block)
    delta = (x[:, None] * on + (1.0 - x[:, None]) * off).sum(axis=0)
    voltages = state.voltages + delta
    out_of_range = bool(np.any(voltages < 0.0) or np.any(voltages > block.v_supply))
    if out_of_range:
        voltages = np.clip(voltages, 0.0, block.v_supply)
    return BlState(voltages=voltages, out_of_range=out_of_range or state.out_of_range)


def charge_share(state: BlState) -> float:
    """Short the four equal capacitors; the shared voltage is their mean."""
    return float(state.voltages.mean())
