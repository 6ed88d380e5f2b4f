"""Parametric energy and latency bookkeeping per macro cycle.

This is an accounting model, not a circuit extraction.  The per-component
constants are solved once so that the shipped defaults reproduce two anchor
efficiency points (current mode 12.18 TOPS/W and charge mode 14.47 TOPS/W at
8-bit inputs and weights, 5-bit ADCs); everything else the model reports is a
prediction from those constants.  One MAC counts as two operations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .geometry import BANKS, GROUPS, KIND_CHARGE, KIND_CURRENT, NIBBLE_BITS, ROWS, ROWS_PER_GROUP

OPS_PER_MAC = 2


@dataclass
class LatencyParams:
    t_pre: float = 1e-9  # bitline precharge (charge mode only)
    t_eval: float = 0.5e-9  # array evaluation window
    t_share: float = 0.5e-9  # capacitor charge sharing (charge mode only)
    t_sar_bit: float = 1e-9  # per resolved ADC bit
    t_digital: float = 0.5e-9  # accumulate step, pipelined behind the next cycle


@dataclass
class EnergyParams:
    e_tia_per_eval: float  # J per block evaluation through the summing stage
    e_adc_per_bit: float  # J per SAR bit cycle
    e_digital_per_accum: float  # J per bank-cycle of digital accumulation
    e_driver_per_row: float  # J per driven row per active block
    bl_capacitance: float = 50e-15  # F
    v_pre: float = 1.5  # V
    v_residual: float = 1.44  # V the bitline is recharged from, accounting value
    calibration_scale: float = 1.0

    def __post_init__(self):
        for name in ("e_tia_per_eval", "e_adc_per_bit", "e_digital_per_accum",
                     "e_driver_per_row", "calibration_scale"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")

    @property
    def e_precharge_per_bl(self) -> float:
        """Supply energy to restore one bitline: C * (v_pre - v_residual) * v_pre."""
        return self.bl_capacitance * (self.v_pre - self.v_residual) * self.v_pre


def _blocks_and_adcs(weight_bits: int) -> tuple[int, int]:
    if weight_bits == 8:
        return 2, 2  # high + low block, signed + unsigned ADC
    if weight_bits == 4:
        return 1, 1  # high block only
    raise ConfigError(f"weight_bits must be 4 or 8, got {weight_bits}")


def _check_input_bits(m_bits: int) -> None:
    if not 1 <= m_bits <= 8:
        raise ConfigError(f"input bits must be 1..8, got {m_bits}")


def energy_breakdown_of_matvec(
    kind: str,
    m_bits: int = 8,
    weight_bits: int = 8,
    adc_bits: int = 5,
    params: EnergyParams | None = None,
    banks: int = BANKS,
    groups: int = GROUPS,
    rows_per_group: int = ROWS_PER_GROUP,
) -> dict:
    """Component energies (J) for one full matrix-vector product."""
    _check_input_bits(m_bits)
    p = params or default_energy_params()
    n_blocks, n_adcs = _blocks_and_adcs(weight_bits)
    cycles = m_bits * groups * banks  # bank-cycles across the whole macro
    if kind == KIND_CURRENT:
        array = cycles * n_blocks * p.e_tia_per_eval
    elif kind == KIND_CHARGE:
        array = cycles * n_blocks * NIBBLE_BITS * p.e_precharge_per_bl
    else:
        raise ConfigError(f"unknown macro kind: {kind!r}")
    adc = cycles * n_adcs * adc_bits * p.e_adc_per_bit
    digital = cycles * p.e_digital_per_accum
    driver = cycles * n_blocks * rows_per_group * p.e_driver_per_row
    scale = p.calibration_scale
    parts = {
        "array": array * scale,
        "adc": adc * scale,
        "digital": digital * scale,
        "driver": driver * scale,
    }
    parts["total"] = sum(parts.values())
    return parts


def energy_of_matvec(kind, m_bits=8, weight_bits=8, adc_bits=5, params=None, **geometry) -> float:
    return energy_breakdown_of_matvec(kind, m_bits, weight_bits, adc_bits, params, **geometry)["total"]


def cycle_latency(kind: str, adc_bits: int = 5, params: LatencyParams | None = None) -> float:
    """One group-cycle; the digital accumulate overlaps the next cycle."""
    p = params or LatencyParams()
    if kind == KIND_CURRENT:
        analog = p.t_eval
    elif kind == KIND_CHARGE:
        analog = p.t_pre + p.t_eval + p.t_share
    else:
        raise ConfigError(f"unknown macro kind: {kind!r}")
    return max(analog + adc_bits * p.t_sar_bit, p.t_digital)


def latency_of_matvec(kind, m_bits=8, groups=GROUPS, adc_bits=5, params=None) -> float:
    """Sequential group-cycles over all input bits; banks run in parallel."""
    _check_input_bits(m_bits)
    return m_bits * groups * cycle_latency(kind, adc_bits, params)


def tops_per_watt(
    kind, m_bits=8, weight_bits=8, adc_bits=5, params=None,
    banks=BANKS, rows=ROWS, **geometry,
) -> float:
    """Efficiency of a full matvec; one MAC per weight column row = 2 ops."""
    energy = energy_of_matvec(kind, m_bits, weight_bits, adc_bits, params,
                              banks=banks, **geometry)
    if energy <= 0.0:
        raise ConfigError("zero-cost energy parameters make efficiency unbounded")
    ops = OPS_PER_MAC * rows * banks
    return ops / energy / 1e12


def calibrate_energy_params(
    target_current_tops_w: float = 12.18,
    target_charge_tops_w: float = 14.47,
    adc_bits: int = 5,
    m_bits: int = 8,
    weight_bits: int = 8,
    overhead_fraction: float = 0.05,
    bl_capacitance: float = 50e-15,
    v_pre: float = 1.5,
    v_residual: float = 1.44,
) -> EnergyParams:
    """Solve the per-component constants from the two anchor efficiencies.

    Digital and driver energy are pinned at `overhead_fraction` of the
    current-mode anchor total each; the precharge term is fixed by the
    bitline physics; the ADC constant then falls out of the charge-mode
    anchor and the summing-stage constant out of the current-mode anchor.
    """
    n_blocks, n_adcs = _blocks_and_adcs(weight_bits)
    ops = OPS_PER_MAC * ROWS * BANKS
    cycles = m_bits * GROUPS * BANKS
    e_cur = ops / (target_current_tops_w * 1e12) / cycles  # J per bank-cycle
    e_chg = ops / (target_charge_tops_w * 1e12) / cycles
    e_digital = overhead_fraction * e_cur
    e_driver_total = overhead_fraction * e_cur
    e_driver_per_row = e_driver_total / (n_blocks * ROWS_PER_GROUP)
    e_pre_per_bl = bl_capacitance * (v_pre - v_residual) * v_pre
    e_adc_per_bit = (
        e_chg - n_blocks * NIBBLE_BITS * e_pre_per_bl - e_digital - e_driver_total
    ) / (n_adcs * adc_bits)
    e_tia_per_eval = (
        e_cur - n_adcs * adc_bits * e_adc_per_bit - e_digital - e_driver_total
    ) / n_blocks
    if e_adc_per_bit <= 0 or e_tia_per_eval <= 0:
        raise ConfigError("anchor efficiencies are not reachable with these overheads")
    return EnergyParams(
        e_tia_per_eval=e_tia_per_eval,
        e_adc_per_bit=e_adc_per_bit,
        e_digital_per_accum=e_digital,
        e_driver_per_row=e_driver_per_row,
        bl_capacitance=bl_capacitance,
        v_pre=v_pre,
        v_residual=v_residual,
    )


_DEFAULT_ENERGY: EnergyParams | None = None


def default_energy_params() -> EnergyParams:
    global _DEFAULT_ENERGY
    if _DEFAULT_ENERGY is None:
        _DEFAULT_ENERGY = calibrate_energy_params()
    return _DEFAULT_ENERGY


def layer_breakdown(schedule, kind, adc_bits=5, energy_params=None, latency_params=None) -> list[dict]:
    """Per-layer energy/latency table for a tiled network schedule.

    `schedule` rows need `name`, `matvecs`, `input_bits`, `weight_bits` keys.
    """
    table = []
    for entry in schedule:
        parts = energy_breakdown_of_matvec(
            kind, entry["input_bits"], entry["weight_bits"], adc_bits, energy_params
        )
        n = entry["matvecs"]
        table.append({
            "name": entry["name"],
            "matvecs": n,
            "energy_array": parts["array"] * n,
            "energy_adc": parts["adc"] * n,
            "energy_digital": (parts["digital"] + parts["driver"]) * n,
            "energy_total": parts["total"] * n,
            "latency_total": latency_of_matvec(
                kind, entry["input_bits"], adc_bits=adc_bits, params=latency_params
            ) * n,
        })
    return table


def scale_efficiency_to_node(value: float, from_node_nm: float, to_node_nm: float = 40.0) -> float:
    """Reporting utility: rescale an efficiency assuming energy ~ node^2."""
    if from_node_nm <= 0 or to_node_nm <= 0:
        raise ConfigError("technology nodes must be positive")
    return value * (from_node_nm / to_node_nm) ** 2
