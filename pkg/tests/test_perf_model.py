import pytest

from fefet_imc.errors import ConfigError
from fefet_imc.geometry import KIND_CHARGE, KIND_CURRENT
from fefet_imc.perf_model import (
    EnergyParams,
    LatencyParams,
    calibrate_energy_params,
    cycle_latency,
    default_energy_params,
    energy_breakdown_of_matvec,
    energy_of_matvec,
    latency_of_matvec,
    layer_breakdown,
    scale_efficiency_to_node,
    tops_per_watt,
)


def test_calibration_reproduces_anchor_points():
    params = default_energy_params()
    assert tops_per_watt(KIND_CURRENT, 8, 8, 5, params) == pytest.approx(12.18, rel=1e-6)
    assert tops_per_watt(KIND_CHARGE, 8, 8, 5, params) == pytest.approx(14.47, rel=1e-6)


def test_calibrated_constants_are_positive():
    p = default_energy_params()
    assert p.e_tia_per_eval > 0 and p.e_adc_per_bit > 0
    assert p.e_digital_per_accum > 0 and p.e_driver_per_row > 0
    assert p.e_precharge_per_bl == pytest.approx(50e-15 * 0.06 * 1.5)


def test_efficiency_non_increasing_in_precision():
    for kind in (KIND_CURRENT, KIND_CHARGE):
        for wb in (4, 8):
            grid = [tops_per_watt(kind, m, wb) for m in (1, 2, 4, 8)]
            assert all(a >= b for a, b in zip(grid, grid[1:]))
        for m in (1, 2, 4, 8):
            assert tops_per_watt(kind, m, 4) >= tops_per_watt(kind, m, 8)


def test_charge_mode_beats_current_mode_everywhere():
    for m in (1, 2, 4, 8):
        for wb in (4, 8):
            assert tops_per_watt(KIND_CHARGE, m, wb) > tops_per_watt(KIND_CURRENT, m, wb)


def test_latency_examples():
    lat = latency_of_matvec(KIND_CURRENT, m_bits=1, groups=1)
    assert lat == pytest.approx(0.5e-9 + 5e-9)
    lat = latency_of_matvec(KIND_CHARGE, m_bits=1, groups=1)
    assert lat == pytest.approx(1e-9 + 0.5e-9 + 0.5e-9 + 5e-9)
    assert latency_of_matvec(KIND_CURRENT, 8, 4) == pytest.approx(32 * 5.5e-9)


def test_charge_cycle_slower_than_current():
    assert cycle_latency(KIND_CHARGE) > cycle_latency(KIND_CURRENT)
    assert latency_of_matvec(KIND_CHARGE, 8) > latency_of_matvec(KIND_CURRENT, 8)


def test_energy_additivity():
    one = energy_of_matvec(KIND_CURRENT, 4, 8)
    assert energy_of_matvec(KIND_CURRENT, 8, 8) == pytest.approx(2 * one)


def test_zero_cost_params_rejected():
    zero = EnergyParams(0.0, 0.0, 0.0, 0.0, v_residual=1.5)
    with pytest.raises(ConfigError):
        tops_per_watt(KIND_CURRENT, 8, 8, 5, zero)
    with pytest.raises(ConfigError):
        EnergyParams(-1.0, 1e-15, 1e-15, 1e-15)


def test_overhead_fractions_hit_five_percent():
    parts = energy_breakdown_of_matvec(KIND_CURRENT, 8, 8, 5)
    assert parts["digital"] / parts["total"] == pytest.approx(0.05, rel=1e-9)
    assert parts["driver"] / parts["total"] == pytest.approx(0.05, rel=1e-9)


def test_unreachable_anchor_raises():
    with pytest.raises(ConfigError):
        calibrate_energy_params(target_current_tops_w=12.18, target_charge_tops_w=1e6)


def test_layer_breakdown_table():
    assert layer_breakdown([], KIND_CURRENT) == []
    single = layer_breakdown(
        [{"name": "fc1", "matvecs": 3, "input_bits": 4, "weight_bits": 8}], KIND_CURRENT
    )
    assert single[0]["energy_total"] == pytest.approx(3 * energy_of_matvec(KIND_CURRENT, 4, 8))
    assert single[0]["latency_total"] == pytest.approx(3 * latency_of_matvec(KIND_CURRENT, 4))
    pair = layer_breakdown(
        [
            {"name": "a", "matvecs": 2, "input_bits": 4, "weight_bits": 8},
            {"name": "b", "matvecs": 2, "input_bits": 4, "weight_bits": 8},
        ],
        KIND_CURRENT,
    )
    assert pair[0]["energy_total"] == pytest.approx(pair[1]["energy_total"])
    assert sum(r["energy_total"] for r in pair) == pytest.approx(
        4 * energy_of_matvec(KIND_CURRENT, 4, 8)
    )


def test_node_scaling_utility():
    assert scale_efficiency_to_node(10.0, 40.0) == 10.0
    assert scale_efficiency_to_node(10.0, 80.0, 40.0) == pytest.approx(40.0)
    with pytest.raises(ConfigError):
        scale_efficiency_to_node(1.0, 0.0)


def test_latency_params_pipelined_digital_never_binds_by_default():
    p = LatencyParams(t_digital=0.4e-9)
    assert cycle_latency(KIND_CURRENT, 5, p) == pytest.approx(5.5e-9)
