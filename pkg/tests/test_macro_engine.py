import numpy as np
import pytest

from fefet_imc.current_array import CurfeBlock, TiaConfig, evaluate_curfe_block
from fefet_imc.device_models import FefetResistorCell, MlcFefetCell
from fefet_imc.encoding import MODE_SIGNED, MODE_UNSIGNED
from fefet_imc.errors import ConfigError, MappingError
from fefet_imc.geometry import KIND_CHARGE, KIND_CURRENT, KIND_HIGH
from fefet_imc.macro_engine import (
    MacroConfig,
    fill_for_target,
    matvec,
    matvec_batch,
    monte_carlo_transfer,
    program_macro,
    readback_weights,
)
from fefet_imc.oracles import exact_dot


def lossless_cfg(kind, **kwargs):
    """sigma = 0, leakage off, 9-bit ADC: the exact-equality regime."""
    return MacroConfig(
        kind=kind,
        adc_bits=9,
        resistor_cell=FefetResistorCell(vth_sigma=0.0, include_off_leakage=False),
        mlc_cell=MlcFefetCell(vth_sigma=0.0, include_off_leakage=False),
        **kwargs,
    )


def test_program_all_zero_and_readback():
    cfg = lossless_cfg(KIND_CURRENT)
    macro = program_macro(np.zeros((128, 16)), cfg)
    assert not macro.stored_bits.any()
    assert np.array_equal(readback_weights(macro), np.zeros((128, 16)))


def test_single_weight_programs_exactly_eight_bits():
    cfg = lossless_cfg(KIND_CURRENT)
    w = np.zeros((128, 16), dtype=np.int64)
    w[5, 3] = -1  # bits 11111111
    macro = program_macro(w, cfg)
    assert macro.stored_bits.sum() == 8
    assert np.array_equal(readback_weights(macro), w)


def test_readback_random_matrix():
    rng = np.random.default_rng(3)
    w = rng.integers(-128, 128, size=(128, 16))
    macro = program_macro(w, lossless_cfg(KIND_CHARGE))
    assert np.array_equal(readback_weights(macro), w)


def test_dimension_mismatch_rejected():
    with pytest.raises(MappingError):
        program_macro(np.zeros((64, 16)), lossless_cfg(KIND_CURRENT))
    with pytest.raises(MappingError):
        program_macro(np.full((128, 16), 200), lossless_cfg(KIND_CURRENT))


def test_worked_example_end_to_end_minus_one():
    for kind in (KIND_CURRENT, KIND_CHARGE):
        cfg = lossless_cfg(kind)
        w = np.zeros((128, 16), dtype=np.int64)
        w[0, 0] = -1
        macro = program_macro(w, cfg)
        x = np.zeros(128, dtype=np.int64)
        x[0] = 1
        res = matvec(macro, x, m=1)
        assert res.outputs[0] == -1
        assert np.all(res.outputs[1:] == 0)


def test_zero_input_vector_gives_zero_outputs():
    cfg = lossless_cfg(KIND_CURRENT)
    rng = np.random.default_rng(0)
    macro = program_macro(rng.integers(-128, 128, size=(128, 16)), cfg)
    res = matvec(macro, np.zeros(128, dtype=np.int64), m=8)
    assert np.all(res.outputs == 0)


@pytest.mark.parametrize("kind", [KIND_CURRENT, KIND_CHARGE])
def test_matvec_lossless_equals_integer_oracle(kind):
    rng = np.random.default_rng(11)
    cfg = lossless_cfg(kind)
    for _ in range(5):
        w = rng.integers(-128, 128, size=(128, 16))
        macro = program_macro(w, cfg)
        x = rng.integers(0, 256, size=128)
        res = matvec(macro, x, m=8)
        expected = [exact_dot(x, w[:, bank]) for bank in range(16)]
        assert res.outputs.tolist() == expected
        assert res.clipped_count == 0 and res.saturated_count == 0


def test_dual_designs_agree_digitally():
    rng = np.random.default_rng(5)
    w = rng.integers(-128, 128, size=(128, 16))
    x = rng.integers(0, 16, size=128)
    out = {}
    for kind in (KIND_CURRENT, KIND_CHARGE):
        macro = program_macro(w, lossless_cfg(kind))
        out[kind] = matvec(macro, x, m=4).outputs
    assert np.array_equal(out[KIND_CURRENT], out[KIND_CHARGE])


def test_four_bit_weight_mode():
    cfg = lossless_cfg(KIND_CURRENT, weight_bits=4)
    rng = np.random.default_rng(8)
    w = rng.integers(-8, 8, size=(128, 16))
    macro = program_macro(w, cfg)
    assert not macro.stored_bits[:, :, 1].any()  # low blocks left unprogrammed
    assert np.array_equal(readback_weights(macro), w)
    x = rng.integers(0, 16, size=128)
    res = matvec(macro, x, m=4)
    assert res.outputs.tolist() == [exact_dot(x, w[:, b]) for b in range(16)]


def test_determinism_same_seed_same_result():
    cfg = MacroConfig(kind=KIND_CHARGE, seed=77)
    rng = np.random.default_rng(1)
    w = rng.integers(-128, 128, size=(128, 16))
    x = rng.integers(0, 256, size=128)
    a = matvec(program_macro(w, cfg), x, m=8)
    b = matvec(program_macro(w, cfg), x, m=8)
    assert np.array_equal(a.outputs, b.outputs)
    assert a.energy_joules == b.energy_joules
    c = matvec(program_macro(w, MacroConfig(kind=KIND_CHARGE, seed=78)), x, m=8)
    assert not np.array_equal(a.outputs, c.outputs)  # devices actually resampled


def test_bit_serial_identity_through_analog_path():
    # same programmed macro: summing per-bit runs with 2^i weights must match
    # the multi-bit run exactly, quantization and variation included
    rng = np.random.default_rng(4)
    w = rng.integers(-128, 128, size=(128, 16))
    x = rng.integers(0, 256, size=128)
    for kind in (KIND_CURRENT, KIND_CHARGE):
        macro = program_macro(w, MacroConfig(kind=kind, adc_bits=5, seed=13))
        full = matvec(macro, x, m=8).outputs
        parts = sum(
            matvec(macro, (x >> i) & 1, m=1).outputs << i for i in range(8)
        )
        assert np.array_equal(full, parts)


def test_matvec_batch_matches_single_calls():
    rng = np.random.default_rng(21)
    w = rng.integers(-128, 128, size=(128, 16))
    macro = program_macro(w, MacroConfig(kind=KIND_CURRENT, adc_bits=5, seed=3))
    xs = rng.integers(0, 16, size=(6, 128))
    batch, _ = matvec_batch(macro, xs, m=4)
    for i in range(6):
        assert np.array_equal(batch[i], matvec(macro, xs[i], m=4).outputs)


def test_engine_matches_block_evaluator():
    # the flat vectorized path and the per-block reference path must agree
    cfg = MacroConfig(kind=KIND_CURRENT, adc_bits=9, seed=5)
    rng = np.random.default_rng(17)
    w = rng.integers(-128, 128, size=(128, 16))
    macro = program_macro(w, cfg)
    x = rng.integers(0, 2, size=128)
    bank, group = 4, 2
    rows = slice(32 * group, 32 * (group + 1))
    block = CurfeBlock(
        kind=KIND_HIGH,
        stored_bits=macro.stored_bits[rows, bank, 0],
        deviations=macro.deviations[rows, bank, 0],
        device=cfg.resistor_cell,
    )
    res = evaluate_curfe_block(block, x[rows], cfg.tia)
    planes = x.reshape(4, 32).astype(float)
    sums = np.einsum("r,rj->j", planes[group], macro.on.reshape(4, 32, 16, 2, 4)[group, :, bank, 0])
    sums += np.einsum("r,rj->j", 1 - planes[group], macro.off.reshape(4, 32, 16, 2, 4)[group, :, bank, 0])
    assert res.net_current == pytest.approx(float(sums.sum()), rel=1e-12)


def test_geometry_validation():
    with pytest.raises(ConfigError):
        MacroConfig(rows=100)
    with pytest.raises(ConfigError):
        MacroConfig(kind="optical")
    with pytest.raises(ConfigError):
        MacroConfig(adc_bits=0)
    with pytest.raises(ConfigError):
        MacroConfig(weight_bits=6)


def test_fill_for_target_round_trip():
    for target in range(0, 481):
        fill = fill_for_target(target, MODE_UNSIGNED)
        assert fill.sum() == target and fill.min() >= 0 and fill.max() <= 15
    for target in range(-256, 225):
        fill = fill_for_target(target, MODE_SIGNED)
        assert fill.sum() == target and fill.min() >= -8 and fill.max() <= 7


def test_monte_carlo_transfer_zero_sigma():
    cfg = lossless_cfg(KIND_CURRENT)
    table = monte_carlo_transfer(cfg, MODE_SIGNED, trials=3)
    assert np.all(table.std_voltage < 1e-12)  # identical trials up to float eps
    unit = cfg.resistor_cell.unit_current * cfg.tia.feedback_resistance
    zero_idx = np.flatnonzero(table.targets == 0)[0]
    assert table.mean_voltage[zero_idx] == pytest.approx(0.5, abs=1e-12)
    fitted = np.polyfit(table.targets, table.mean_voltage, 1)
    assert fitted[0] == pytest.approx(unit, rel=1e-9)


def test_monte_carlo_transfer_charge_polarity():
    cfg = lossless_cfg(KIND_CHARGE)
    table = monte_carlo_transfer(cfg, MODE_UNSIGNED, trials=1, targets=[0, 100, 480])
    assert table.mean_voltage[0] == pytest.approx(1.5, abs=1e-12)
    assert table.mean_voltage[2] == pytest.approx(1.5 - 0.120, abs=1e-9)
    assert np.all(np.diff(table.mean_voltage) < 0)


def test_monte_carlo_variation_orders_current_below_charge():
    tables = {}
    for kind in (KIND_CURRENT, KIND_CHARGE):
        cfg = MacroConfig(kind=kind, seed=42)
        tables[kind] = monte_carlo_transfer(cfg, MODE_UNSIGNED, trials=25, targets=[240, 480])
    assert np.all(
        tables[KIND_CURRENT].std_voltage / 0.4 < tables[KIND_CHARGE].std_voltage / 0.12
    )
