"""Behavioral signed/unsigned SAR-style ADC with reference-bank spans.

The converter quantizes on the integer value axis, not on volts: the
reference bank derives v_ref_low/high from the macro's nominal affine
transfer at the endpoints of the legal value span, the affine map is
inverted, and a uniform mid-tread quantizer rounds the recovered value to a
code.  Unsigned conversions spread 2^bits - 1 steps over [0, 15 * rows];
signed conversions anchor code 0 at value 0 with step 8 * rows / 2^(bits-1),
which makes the -8 * rows endpoint land exactly on the most negative code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .charge_array import ChgfeBlock
from .current_array import TiaConfig
from .device_models import FefetResistorCell, MlcFefetCell
from .encoding import MODE_SIGNED, MODE_UNSIGNED
from .errors import ConfigError, ConversionError
from .geometry import KIND_CHARGE, KIND_CURRENT

POLARITY_DIRECT = "direct"
POLARITY_INVERTED = "inverted"


def value_span(mode: str, rows_active: int) -> tuple[int, int]:
    """Legal integer value range reachable by `rows_active` rows."""
    if mode == MODE_UNSIGNED:
        return 0, 15 * rows_active
    if mode == MODE_SIGNED:
        return -8 * rows_active, 7 * rows_active
    raise ConfigError(f"unknown ADC mode: {mode!r}")


@dataclass
class AdcConfig:
    mode: str  # MODE_SIGNED or MODE_UNSIGNED
    bits: int  # resolution, 1..12
    v_ref_low: float  # volts at the low end of the value span
    v_ref_high: float  # volts at the high end of the value span
    polarity: str = POLARITY_DIRECT  # inverted: larger value -> lower voltage
    rows_active: int = 32

    def __post_init__(self):
        if not 1 <= self.bits <= 12:
            raise ConfigError(f"adc bits must be 1..12, got {self.bits}")
        if self.mode not in (MODE_SIGNED, MODE_UNSIGNED):
            raise ConfigError(f"unknown ADC mode: {self.mode!r}")
        if self.polarity not in (POLARITY_DIRECT, POLARITY_INVERTED):
            raise ConfigError(f"unknown polarity: {self.polarity!r}")
        if self.rows_active < 1:
            raise ConfigError(f"rows_active must be >= 1, got {self.rows_active}")
        if self.v_ref_high <= self.v_ref_low:
            raise ConfigError("v_ref_high must exceed v_ref_low")

    @property
    def code_range(self) -> tuple[int, int]:
        if self.mode == MODE_UNSIGNED:
            return 0, (1 << self.bits) - 1
        half = 1 << (self.bits - 1)
        return -half, half - 1

    @property
    def is_lossless(self) -> bool:
        """True when every legal integer value round-trips exactly."""
        lo, hi = value_span(self.mode, self.rows_active)
        if self.mode == MODE_UNSIGNED:
            return (1 << self.bits) - 1 >= hi
        return (1 << (self.bits - 1)) >= -lo


@dataclass
class AdcCode:
    code: int
    clipped: bool = False


def make_reference(
    mode: str,
    bits: int,
    rows_active: int = 32,
    macro_kind: str = KIND_CURRENT,
    *,
    resistor_cell: FefetResistorCell | None = None,
    tia: TiaConfig | None = None,
    mlc_cell: MlcFefetCell | None = None,
    bl_capacitance: float = 50e-15,
    v_pre: float = 1.5,
    t_eval: float = 0.5e-9,
) -> AdcConfig:
    """Reference-bank spans for one macro kind and readout mode.

    The span endpoints are the nominal (zero-deviation) analog outputs at the
    extreme legal values, so a noiseless conversion recovers the integer
    value exactly whenever the resolution allows it.
    """
    lo, hi = value_span(mode, rows_active)
    if macro_kind == KIND_CURRENT:
        cell = resistor_cell or FefetResistorCell()
        stage = tia or TiaConfig()
        unit = cell.unit_current * stage.feedback_resistance  # volts per value unit
        return AdcConfig(
            mode=mode,
            bits=bits,
            v_ref_low=stage.vcm + lo * unit,
            v_ref_high=stage.vcm + hi * unit,
            polarity=POLARITY_DIRECT,
            rows_active=rows_active,
        )
    if macro_kind == KIND_CHARGE:
        cell = mlc_cell or MlcFefetCell()
        unit = cell.unit_current * t_eval / bl_capacitance / 4.0  # shared dV per value unit
        return AdcConfig(
            mode=mode,
            bits=bits,
            v_ref_low=v_pre - hi * unit,
            v_ref_high=v_pre - lo * unit,
            polarity=POLARITY_INVERTED,
            rows_active=rows_active,
        )
    raise ConfigError(f"unknown macro kind: {macro_kind!r}")


def reference_for_block(mode, bits, block: ChgfeBlock, rows_active: int = 32) -> AdcConfig:
    """Convenience wrapper deriving charge-mode references from a block."""
    return make_reference(
        mode, bits, rows_active, KIND_CHARGE,
        mlc_cell=block.device, bl_capacitance=block.bl_capacitance,
        v_pre=block.v_pre, t_eval=block.t_eval,
    )


def _value_estimate(v, cfg: AdcConfig) -> np.ndarray:
    lo, hi = value_span(cfg.mode, cfg.rows_active)
    slope = (cfg.v_ref_high - cfg.v_ref_low) / (hi - lo)
    if cfg.polarity == POLARITY_DIRECT:
        return lo + (np.asarray(v, dtype=np.float64) - cfg.v_ref_low) / slope
    return lo + (cfg.v_ref_high - np.asarray(v, dtype=np.float64)) / slope


def _code_scale(cfg: AdcConfig) -> float:
    """Codes per value unit of the mid-tread quantizer."""
    _, hi = value_span(cfg.mode, cfg.rows_active)
    if cfg.mode == MODE_UNSIGNED:
        return ((1 << cfg.bits) - 1) / hi
    return (1 << (cfg.bits - 1)) / (8 * cfg.rows_active)


def convert_array(v, cfg: AdcConfig) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized conversion; returns (codes, clipped mask)."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ConversionError("non-finite sample voltage")
    value_est = np.rint(_value_estimate(v, cfg))
    codes = np.rint(value_est * _code_scale(cfg)).astype(np.int64)
    code_lo, code_hi = cfg.code_range
    clipped = (codes < code_lo) | (codes > code_hi)
    return np.clip(codes, code_lo, code_hi), clipped


def convert(v: float, cfg: AdcConfig) -> AdcCode:
    """Convert one analog sample to a code, flagging out-of-span clipping."""
    if not math.isfinite(v):
        raise ConversionError(f"non-finite sample voltage: {v}")
    codes, clipped = convert_array(np.asarray([v]), cfg)
    return AdcCode(code=int(codes[0]), clipped=bool(clipped[0]))


def dequantize_array(codes, cfg: AdcConfig) -> np.ndarray:
    """Vectorized integer value estimates from codes."""
    return np.rint(np.asarray(codes, dtype=np.float64) / _code_scale(cfg)).astype(np.int64)


def dequantize(code: AdcCode | int, cfg: AdcConfig) -> int:
    """Integer value estimate for a code (inverse of the code mapping)."""
    raw = code.code if isinstance(code, AdcCode) else int(code)
    lo, hi = cfg.code_range
    if raw < lo or raw > hi:
        raise ConversionError(f"code {raw} outside {cfg.mode} range [{lo}, {hi}]")
    return int(dequantize_array(np.asarray([raw]), cfg)[0])
