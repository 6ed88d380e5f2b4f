"""Parametric behavioral current models for the three memory-cell types.

Current-mode cells pair an nFeFET switch with a drain ladder resistor, so the
ON current is resistor-limited and nearly immune to threshold variation.
Charge-mode cells run a bare FeFET in saturation; bit significance is encoded
in the programmed overdrive and the current follows a square law, which makes
it far more sensitive to the same Vth spread.  Both models expose a common
ON/OFF leakage floor and deterministic per-cell variation sampling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateDeviceWarning
from .rng import VthSample, derive_seed, gaussian_for_cells, sample_vth  # noqa: F401

N_TYPE = "n_type"
P_TYPE = "p_type"


@dataclass
class FefetResistorCell:
    """Current-mode cell: single-level FeFET in series with a ladder resistor."""

    vdd_i: float = 1.0  # source-line drive for the sign column (V)
    vcm: float = 0.5  # bitline bias held by the readout amplifier (V)
    ladder_base_resistance: float = 5.0e6  # bit-0 drain resistor (ohm); bit j uses base/2^j
    channel_on_resistance: float = 1.0e5  # ON-state FeFET channel (ohm), scaled with bit width
    channel_resistance_sensitivity: float = 2.0  # fractional channel change per volt of Vth shift
    vth_sigma: float = 0.040  # per-state threshold spread (V)
    on_off_ratio: float = 1.0e5
    include_off_leakage: bool = True

    @property
    def unit_current(self) -> float:
        """Nominal bit-0 ON current (A); bit j conducts 2^j times this."""
        return self.vcm / (self.ladder_base_resistance + self.channel_on_resistance)


@dataclass
class MlcFefetCell:
    """Charge-mode cell: FeFET in saturation, overdrive programmed per bit."""

    transconductance_k: float = 6.25e-7  # K in I = K * Vov^2 (A/V^2); 100 nA at 0.4 V overdrive
    base_overdrive: float = 0.4  # bit-0 gate overdrive (V); bit j gets base * 2^(j/2)
    vth_sigma: float = 0.040  # V
    on_off_ratio: float = 1.0e5
    polarity: str = N_TYPE  # sign-position cells are instantiated p-type
    include_off_leakage: bool = True

    @property
    def unit_current(self) -> float:
        """Nominal bit-0 saturation current (A)."""
        return self.transconductance_k * self.base_overdrive**2

    def overdrive(self, bit_position: int) -> float:
        return self.base_overdrive * 2.0 ** (bit_position / 2.0)


def _check_bit_position(bit_position: int) -> None:
    if bit_position not in (0, 1, 2, 3):
        raise ConfigError(f"bit_position must be 0..3, got {bit_position}")


def cell_current_curfe(
    model: FefetResistorCell,
    bit_position: int,
    is_sign_position: bool,
    stored_bit,
    input_bit,
    vth_deviation,
):
    """Signed drain current (A) of one current-mode cell.

    ON current is 2^j * V_drive / (R_base + r_ch) with the channel resistance
    varying linearly in the Vth deviation; the sign column conducts in the
    opposite direction, driven by (vdd_i - vcm) instead of vcm.  Cells that
    are not fully selected contribute the nominal current divided by the
    ON/OFF ratio (or exactly zero when leakage is disabled).

    `stored_bit`, `input_bit`, and `vth_deviation` broadcast as arrays.
    """
    _check_bit_position(bit_position)
    drive = (model.vdd_i - model.vcm) if is_sign_position else model.vcm
    sign = -1.0 if is_sign_position else 1.0
    dev = np.asarray(vth_deviation, dtype=np.float64)
    r_ch = model.channel_on_resistance * (1.0 + model.channel_resistance_sensitivity * dev)
    on = sign * (2.0**bit_position) * drive / (model.ladder_base_resistance + r_ch)
    nominal = sign * (2.0**bit_position) * drive / (
        model.ladder_base_resistance + model.channel_on_resistance
    )
    off = nominal / model.on_off_ratio if model.include_off_leakage else 0.0
    selected = np.asarray(stored_bit, dtype=np.float64) * np.asarray(input_bit, dtype=np.float64)
    out = np.where(selected > 0, on, off)
    return out if out.ndim else float(out)


def cell_delta_v_chgfe(
    model: MlcFefetCell,
    bit_position: int,
    is_sign_position: bool,
    stored_bit,
    input_bit,
    vth_deviation,
    eval_time: float,
    bl_capacitance: float,
):
    """Signed bitline voltage change (V) from one charge-mode cell.

    The cell sources a constant saturation current K * Vov^2 for the whole
    evaluation window, so dV = sign * I * t / C.  Sign-position (p-type)
    cells charge their bitline; all others discharge it.  A deviation that
    consumes the entire overdrive clamps the current to zero and emits a
    DegenerateDeviceWarning.
    """
    _check_bit_position(bit_position)
    if eval_time <= 0:
        raise ConfigError(f"eval_time must be positive, got {eval_time}")
    if bl_capacitance <= 0:
        raise ConfigError(f"bl_capacitance must be positive, got {bl_capacitance}")
    polarity = P_TYPE if is_sign_position else model.polarity
    dev_sign = 1.0 if polarity == P_TYPE else -1.0
    vov = model.overdrive(bit_position)
    dev = np.asarray(vth_deviation, dtype=np.float64)
    effective = vov + dev_sign * dev
    if np.any(effective <= 0):
        warnings.warn(
            f"overdrive fully consumed by Vth deviation at bit {bit_position}; current clamped",
            DegenerateDeviceWarning,
            stacklevel=2,
        )
    current = model.transconductance_k * np.square(np.maximum(effective, 0.0))
    direction = 1.0 if is_sign_position else -1.0
    scale = eval_time / bl_capacitance
    on = direction * current * scale
    nominal = direction * model.transconductance_k * vov**2 * scale
    off = nominal / model.on_off_ratio if model.include_off_leakage else 0.0
    selected = np.asarray(stored_bit, dtype=np.float64) * np.asarray(input_bit, dtype=np.float64)
    out = np.where(selected > 0, on, off)
    return out if out.ndim else float(out)
