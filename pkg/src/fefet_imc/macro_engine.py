"""Full-macro orchestration: programming, cycle sequencing, and sweeps.

A macro holds 16 banks of paired high/low nibble blocks over a 128 x 128 cell
grid and produces one dot product per bank.  A matrix-vector product walks
input bits serially and row groups sequentially, evaluates the live high and
low block of every bank, converts both through the signed/unsigned ADCs, and
accumulates digitally.  Programming draws one Vth deviation per physical
cell, keyed by (seed, row, column), so identical seeds rebuild identical
macros.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import perf_model
from .device_models import (
    FefetResistorCell,
    MlcFefetCell,
    cell_current_curfe,
    cell_delta_v_chgfe,
)
from .encoding import (
    MODE_SIGNED,
    MODE_UNSIGNED,
    nibble_bits_to_values,
    weight_matrix_nibble_bits,
)
from .errors import ConfigError, MappingError
from .geometry import (
    BANKS,
    COLS,
    GROUPS,
    KIND_CHARGE,
    KIND_CURRENT,
    KIND_HIGH,
    KIND_LOW,
    NIBBLE_BITS,
    ROWS,
    ROWS_PER_GROUP,
    SIGN_BIT_POSITION,
    check_geometry,
    physical_column,
)
from .current_array import TiaConfig
from .readout import convert_array, dequantize_array, make_reference
from .rng import derive_seed, gaussian_for_cells

_HIGH, _LOW = 0, 1  # kind-axis order in the programmed arrays


@dataclass
class MacroConfig:
    kind: str = KIND_CURRENT
    adc_bits: int = 5
    weight_bits: int = 8  # 4-bit mode programs the high blocks only
    seed: int = 0
    rows: int = ROWS
    cols: int = COLS
    banks: int = BANKS
    rows_per_group: int = ROWS_PER_GROUP
    resistor_cell: FefetResistorCell = field(default_factory=FefetResistorCell)
    mlc_cell: MlcFefetCell = field(default_factory=MlcFefetCell)
    tia: TiaConfig = field(default_factory=TiaConfig)
    bl_capacitance: float = 50e-15  # F per bitline (charge mode)
    v_pre: float = 1.5  # V
    t_pre: float = 1e-9  # s
    t_eval: float = 0.5e-9  # s
    v_supply: float = 2.0  # charge-path rail for range flagging (V)
    energy_params: perf_model.EnergyParams | None = None
    latency_params: perf_model.LatencyParams | None = None

    def __post_init__(self):
        check_geometry(self.rows, self.cols, self.banks, self.rows_per_group)
        if self.kind not in (KIND_CURRENT, KIND_CHARGE):
            raise ConfigError(f"macro kind must be current or charge, got {self.kind!r}")
        if self.weight_bits not in (4, 8):
            raise ConfigError(f"weight_bits must be 4 or 8, got {self.weight_bits}")
        if not 1 <= self.adc_bits <= 12:
            raise ConfigError(f"adc_bits must be 1..12, got {self.adc_bits}")

    @property
    def sigma(self) -> float:
        cell = self.resistor_cell if self.kind == KIND_CURRENT else self.mlc_cell
        return cell.vth_sigma

    def adc_for(self, mode: str):
        return make_reference(
            mode, self.adc_bits, self.rows_per_group, self.kind,
            resistor_cell=self.resistor_cell, tia=self.tia,
            mlc_cell=self.mlc_cell, bl_capacitance=self.bl_capacitance,
            v_pre=self.v_pre, t_eval=self.t_eval,
        )


@dataclass
class ProgrammedMacro:
    """Cell grid after programming: stored bits, deviations, cell transfers.

    `on` and `off` hold each cell's analog contribution (amps in current
    mode, bitline volts in charge mode) when its row input is 1 and 0; shape
    (rows, banks, 2, 4) with axis 2 = [high, low] and axis 3 the nibble bit.
    """

    cfg: MacroConfig
    weights: np.ndarray
    stored_bits: np.ndarray
    deviations: np.ndarray
    on: np.ndarray
    off: np.ndarray


@dataclass
class MacResult:
    outputs: np.ndarray  # (banks,) integer MAC values
    saturated_count: int = 0  # summing-stage rail hits (current mode)
    range_flag_count: int = 0  # bitline rail hits (charge mode)
    clipped_count: int = 0  # ADC codes outside the span
    energy_joules: float = 0.0
    latency_seconds: float = 0.0


def _deviation_grid(cfg: MacroConfig, seed: int) -> np.ndarray:
    """Per-cell deviations arranged (rows, banks, kind, bit)."""
    grid = gaussian_for_cells(
        seed, np.arange(cfg.rows)[:, None], np.arange(cfg.cols)[None, :], cfg.sigma
    )
    out = np.empty((cfg.rows, cfg.banks, 2, NIBBLE_BITS))
    for bank in range(cfg.banks):
        for bit in range(NIBBLE_BITS):
            out[:, bank, _HIGH, bit] = grid[:, physical_column(bank, KIND_HIGH, bit)]
            out[:, bank, _LOW, bit] = grid[:, physical_column(bank, KIND_LOW, bit)]
    return out


def _cell_transfers(cfg: MacroConfig, stored: np.ndarray, dev: np.ndarray):
    """Selected/deselected analog contribution of every cell."""
    on = np.empty_like(dev)
    off = np.empty_like(dev)
    for kidx, kind in ((_HIGH, KIND_HIGH), (_LOW, KIND_LOW)):
        for bit in range(NIBBLE_BITS):
            is_sign = kind == KIND_HIGH and bit == SIGN_BIT_POSITION
            s, d = stored[:, :, kidx, bit], dev[:, :, kidx, bit]
            if cfg.kind == KIND_CURRENT:
                on[:, :, kidx, bit] = cell_current_curfe(cfg.resistor_cell, bit, is_sign, s, 1, d)
                off[:, :, kidx, bit] = cell_current_curfe(cfg.resistor_cell, bit, is_sign, s, 0, d)
            else:
                on[:, :, kidx, bit] = cell_delta_v_chgfe(
                    cfg.mlc_cell, bit, is_sign, s, 1, d, cfg.t_eval, cfg.bl_capacitance
                )
                off[:, :, kidx, bit] = cell_delta_v_chgfe(
                    cfg.mlc_cell, bit, is_sign, s, 0, d, cfg.t_eval, cfg.bl_capacitance
                )
    return on, off


def program_macro(weights, cfg: MacroConfig, seed: int | None = None) -> ProgrammedMacro:
    """Map a (128, 16) weight matrix onto the cell grid and sample devices."""
    w = np.asarray(weights, dtype=np.int64)
    if w.shape != (cfg.rows, cfg.banks):
        raise MappingError(f"weights must be ({cfg.rows}, {cfg.banks}), got {w.shape}")
    stored = np.zeros((cfg.rows, cfg.banks, 2, NIBBLE_BITS), dtype=np.uint8)
    if cfg.weight_bits == 8:
        if w.size and (w.min() < -128 or w.max() > 127):
            raise MappingError("8-bit weights must lie in [-128, 127]")
        high, low = weight_matrix_nibble_bits(w)
        stored[:, :, _HIGH] = high
        stored[:, :, _LOW] = low
    else:
        if w.size and (w.min() < -8 or w.max() > 7):
            raise MappingError("4-bit weights must lie in [-8, 7]")
        u = w & 0xF
        shifts = np.arange(NIBBLE_BITS, dtype=np.int64)
        stored[:, :, _HIGH] = ((u[..., None] >> shifts) & 1).astype(np.uint8)
    dev = _deviation_grid(cfg, cfg.seed if seed is None else seed)
    on, off = _cell_transfers(cfg, stored, dev)
    return ProgrammedMacro(cfg=cfg, weights=w, stored_bits=stored, deviations=dev, on=on, off=off)


def readback_weights(macro: ProgrammedMacro) -> np.ndarray:
    """Decode the stored bits back to the integer weight matrix."""
    high = nibble_bits_to_values(macro.stored_bits[:, :, _HIGH], MODE_SIGNED)
    if macro.cfg.weight_bits == 4:
        return high
    low = nibble_bits_to_values(macro.stored_bits[:, :, _LOW], MODE_UNSIGNED)
    return 16 * high + low


def matvec_batch(macro: ProgrammedMacro, x_batch, m: int) -> tuple[np.ndarray, dict]:
    """Digital MAC outputs for a batch of input vectors.

    Returns (outputs, flags) where outputs is (batch, banks) int64 and flags
    counts saturation, bitline range, and ADC clip events over the batch.
    """
    cfg = macro.cfg
    x = np.atleast_2d(np.asarray(x_batch, dtype=np.int64))
    if x.shape[1] != cfg.rows:
        raise MappingError(f"input vectors must have {cfg.rows} entries, got {x.shape[1]}")
    batch = x.shape[0]
    if not 1 <= m <= 8:
        raise ConfigError(f"input precision must be 1..8, got {m}")
    if x.size and (x.min() < 0 or x.max() >= (1 << m)):
        raise MappingError(f"input vectors exceed {m}-bit unsigned range")
    planes = (x[:, None, :] >> np.arange(m, dtype=np.int64)[None, :, None]) & 1
    planes = planes.reshape(batch, m, GROUPS, ROWS_PER_GROUP).astype(np.float64)
    on = macro.on.reshape(GROUPS, ROWS_PER_GROUP, cfg.banks, 2, NIBBLE_BITS)
    off = macro.off.reshape(GROUPS, ROWS_PER_GROUP, cfg.banks, 2, NIBBLE_BITS)
    # per-bitline analog sums for every (sample, input bit, group, bank, kind)
    sums = np.einsum("bmgr,grnkj->bmgnkj", planes, on)
    sums += np.einsum("bmgr,grnkj->bmgnkj", 1.0 - planes, off)

    flags = {"saturated": 0, "range": 0, "clipped": 0}
    if cfg.kind == KIND_CURRENT:
        net = sums.sum(axis=-1)  # the four bitlines share one summing node
        volts = cfg.tia.vcm + net * cfg.tia.feedback_resistance
        rail = (volts < cfg.tia.v_rail_low) | (volts > cfg.tia.v_rail_high)
        flags["saturated"] = int(rail.sum())
        volts = np.clip(volts, cfg.tia.v_rail_low, cfg.tia.v_rail_high)
    else:
        bl = cfg.v_pre + sums  # per-bitline voltages
        out_of_range = (bl < 0.0) | (bl > cfg.v_supply)
        flags["range"] = int(out_of_range.sum())
        bl = np.clip(bl, 0.0, cfg.v_supply)
        volts = bl.mean(axis=-1)  # charge sharing across the four bitlines

    adc_high = cfg.adc_for(MODE_SIGNED)
    codes_h, clip_h = convert_array(volts[..., _HIGH], adc_high)
    values = 16 * dequantize_array(codes_h, adc_high) if cfg.weight_bits == 8 else (
        dequantize_array(codes_h, adc_high)
    )
    flags["clipped"] = int(clip_h.sum())
    if cfg.weight_bits == 8:
        adc_low = cfg.adc_for(MODE_UNSIGNED)
        codes_l, clip_l = convert_array(volts[..., _LOW], adc_low)
        values = values + dequantize_array(codes_l, adc_low)
        flags["clipped"] += int(clip_l.sum())

    shifts = (1 << np.arange(m, dtype=np.int64))[None, :, None, None]
    outputs = (values * shifts).sum(axis=(1, 2))  # over input bits and groups
    return outputs, flags


def matvec(macro: ProgrammedMacro, x, m: int) -> MacResult:
    """One matrix-vector product with energy/latency tallies."""
    outputs, flags = matvec_batch(macro, np.asarray(x)[None, :], m)
    cfg = macro.cfg
    return MacResult(
        outputs=outputs[0],
        saturated_count=flags["saturated"],
        range_flag_count=flags["range"],
        clipped_count=flags["clipped"],
        energy_joules=perf_model.energy_of_matvec(
            cfg.kind, m, cfg.weight_bits, cfg.adc_bits, cfg.energy_params
        ),
        latency_seconds=perf_model.latency_of_matvec(
            cfg.kind, m, GROUPS, cfg.adc_bits, cfg.latency_params
        ),
    )


@dataclass
class TransferTable:
    """Monte Carlo transfer sweep: analog output statistics per target value."""

    mode: str
    targets: np.ndarray  # integer MAC values
    mean_voltage: np.ndarray
    std_voltage: np.ndarray
    trials: int


def fill_for_target(target: int, mode: str) -> np.ndarray:
    """A 32-row nibble fill whose all-ones-input MAC equals `target`."""
    fill = np.zeros(ROWS_PER_GROUP, dtype=np.int64)
    if mode == MODE_UNSIGNED:
        if not 0 <= target <= 15 * ROWS_PER_GROUP:
            raise ConfigError(f"unsigned target out of range: {target}")
        k, rem = divmod(target, 15)
        fill[:k] = 15
        if rem:
            fill[k] = rem
    elif mode == MODE_SIGNED:
        if not -8 * ROWS_PER_GROUP <= target <= 7 * ROWS_PER_GROUP:
            raise ConfigError(f"signed target out of range: {target}")
        if target >= 0:
            k, rem = divmod(target, 7)
            fill[:k] = 7
            if rem:
                fill[k] = rem
        else:
            k, rem = divmod(-target, 8)
            fill[:k] = -8
            if rem:
                fill[k] = -rem
    else:
        raise ConfigError(f"unknown mode: {mode!r}")
    return fill


def transfer_trial_outputs(
    cfg: MacroConfig,
    mode: str,
    trials: int,
    targets=None,
    trial_offset: int = 0,
    bank: int = 0,
    group: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Raw per-trial analog outputs of the transfer sweep.

    Trial i draws its devices from derive_seed(cfg.seed, trial_offset + i),
    so sweeps may be chunked across workers and merged by trial index.
    Returns (targets, outputs) with outputs shaped (trials, len(targets)).
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    lo, hi = (0, 15 * ROWS_PER_GROUP) if mode == MODE_UNSIGNED else (
        -8 * ROWS_PER_GROUP, 7 * ROWS_PER_GROUP
    )
    targets = np.arange(lo, hi + 1, dtype=np.int64) if targets is None else (
        np.asarray(targets, dtype=np.int64)
    )
    kind = KIND_HIGH if mode == MODE_SIGNED else KIND_LOW
    bits = np.zeros((targets.size, ROWS_PER_GROUP, NIBBLE_BITS), dtype=np.float64)
    for t, target in enumerate(targets):
        u = fill_for_target(int(target), mode) & 0xF
        bits[t] = (u[:, None] >> np.arange(NIBBLE_BITS)) & 1

    rows = group * ROWS_PER_GROUP + np.arange(ROWS_PER_GROUP)
    cols = np.array([physical_column(bank, kind, b) for b in range(NIBBLE_BITS)])
    outs = np.empty((trials, targets.size))
    for trial in range(trials):
        dev = gaussian_for_cells(
            derive_seed(cfg.seed, trial_offset + trial), rows[:, None], cols[None, :], cfg.sigma
        )
        on = np.empty((ROWS_PER_GROUP, NIBBLE_BITS))
        off = np.empty_like(on)
        for bit in range(NIBBLE_BITS):
            is_sign = kind == KIND_HIGH and bit == SIGN_BIT_POSITION
            if cfg.kind == KIND_CURRENT:
                on[:, bit] = cell_current_curfe(cfg.resistor_cell, bit, is_sign, 1, 1, dev[:, bit])
                off[:, bit] = cell_current_curfe(cfg.resistor_cell, bit, is_sign, 0, 1, dev[:, bit])
            else:
                on[:, bit] = cell_delta_v_chgfe(
                    cfg.mlc_cell, bit, is_sign, 1, 1, dev[:, bit], cfg.t_eval, cfg.bl_capacitance
                )
                off[:, bit] = cell_delta_v_chgfe(
                    cfg.mlc_cell, bit, is_sign, 0, 1, dev[:, bit], cfg.t_eval, cfg.bl_capacitance
                )
        total = np.einsum("twj,wj->t", bits, on) + np.einsum("twj,wj->t", 1.0 - bits, off)
        if cfg.kind == KIND_CURRENT:
            outs[trial] = cfg.tia.vcm + total * cfg.tia.feedback_resistance
        else:
            outs[trial] = cfg.v_pre + total / NIBBLE_BITS
    return targets, outs


def table_from_outputs(mode: str, targets: np.ndarray, outs: np.ndarray) -> TransferTable:
    return TransferTable(
        mode=mode,
        targets=targets,
        mean_voltage=outs.mean(axis=0),
        std_voltage=outs.std(axis=0, ddof=1) if outs.shape[0] > 1 else np.zeros(targets.size),
        trials=outs.shape[0],
    )


def monte_carlo_transfer(
    cfg: MacroConfig, mode: str, trials: int, targets=None, bank: int = 0, group: int = 0
) -> TransferTable:
    """Analog block output vs target MAC value, fresh devices per trial.

    Sweeps every reachable value of a 32-row, all-inputs-active block (the
    exhaustive 1-bit-input x 4-bit-weight combinations) and reports the mean
    and standard deviation of the analog output across device instances.
    """
    targets, outs = transfer_trial_outputs(cfg, mode, trials, targets, 0, bank, group)
    return table_from_outputs(mode, targets, outs)
