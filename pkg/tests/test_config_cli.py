import json

import numpy as np
import pytest

from fefet_imc.cli import main, run_experiment
from fefet_imc.config import load_config, macro_config_from, validate_config
from fefet_imc.errors import ConfigError


def test_defaults_resolve_and_build():
    resolved = load_config(None)
    cfg = macro_config_from(resolved)
    assert cfg.kind == "current" and cfg.adc_bits == 5
    assert cfg.resistor_cell.vth_sigma == pytest.approx(0.040)
    assert cfg.energy_params.e_tia_per_eval > 0


def test_empty_file_is_all_defaults(tmp_path):
    path = tmp_path / "empty.ini"
    path.write_text("")
    assert validate_config(path) == load_config(None)


def test_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text("[macro]\nkind = charge\nseed = 11\n\n[adc]\nbits = 7\n")
    resolved = load_config(path, overrides=["device.vth_sigma=0.02", "adc.bits=6"])
    assert resolved["macro"]["kind"] == "charge"
    assert resolved["macro"]["seed"] == 11
    assert resolved["adc"]["bits"] == 6  # override wins over file
    assert resolved["device"]["vth_sigma"] == pytest.approx(0.02)


def test_geometry_and_range_diagnostics(tmp_path):
    bad_rows = tmp_path / "rows.ini"
    bad_rows.write_text("[macro]\nrows = 100\n")
    with pytest.raises(ConfigError, match="rows must be 128"):
        validate_config(bad_rows)
    bad_bits = tmp_path / "bits.ini"
    bad_bits.write_text("[adc]\nbits = 0\n")
    with pytest.raises(ConfigError, match="bits must be 1..12"):
        validate_config(bad_bits)
    unknown = tmp_path / "unk.ini"
    unknown.write_text("[macro]\nwheels = 4\n")
    with pytest.raises(ConfigError, match="unknown key"):
        validate_config(unknown)
    with pytest.raises(ConfigError, match="not found"):
        validate_config(tmp_path / "missing.ini")


def test_bad_override_strings():
    with pytest.raises(ConfigError):
        load_config(None, overrides=["garbage"])
    with pytest.raises(ConfigError):
        load_config(None, overrides=["nokey=1"])
    with pytest.raises(ConfigError):
        load_config(None, overrides=["macro.kind=optical"])


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[macro]\nrows = 100\n")
    assert main(["--experiment", "fig3_example", "--config", str(bad),
                 "--out", str(tmp_path / "x")]) == 2
    assert main(["--check-config", str(bad)]) == 2
    ok = tmp_path / "ok.ini"
    ok.write_text("[adc]\nbits = 5\n")
    assert main(["--check-config", str(ok)]) == 0


def test_unknown_experiment_rejected(tmp_path):
    with pytest.raises(ConfigError):
        run_experiment("fig99", load_config(None), tmp_path)


def test_fig3_and_fig5_run_green(tmp_path):
    resolved = load_config(None)
    assert run_experiment("fig3_example", resolved, tmp_path / "f3") == 0
    assert run_experiment("fig5_example", resolved, tmp_path / "f5") == 0
    manifest = json.loads((tmp_path / "f3" / "manifest.json").read_text())
    assert manifest["experiment"] == "fig3_example"
    assert manifest["config"]["macro"]["rows"] == 128
    body = (tmp_path / "f3" / "results.csv").read_text().splitlines()
    assert body[0].startswith("variant,block")
    assert len(body) == 5


def test_fig6_and_fig7_run_green(tmp_path):
    resolved = load_config(None, overrides=["experiment.trials=40"])
    assert run_experiment("fig6_hist", resolved, tmp_path / "f6") == 0
    hist = (tmp_path / "f6" / "histogram.csv").read_text().splitlines()
    assert len(hist) == 1 + 2 * 8 * 40  # header + kinds x cells x trials
    assert run_experiment("fig7_efficiency", resolved, tmp_path / "f7") == 0
    summary = json.loads((tmp_path / "f7" / "summary.json").read_text())
    assert summary["anchor_current_8b8b"] == pytest.approx(12.18, rel=1e-6)
    assert summary["anchor_charge_8b8b"] == pytest.approx(14.47, rel=1e-6)


def test_fig8_rerun_byte_identical(tmp_path):
    resolved = load_config(None, overrides=["experiment.trials=10", "macro.seed=5"])
    assert run_experiment("fig8_transfer", resolved, tmp_path / "a") == 0
    assert run_experiment("fig8_transfer", resolved, tmp_path / "b") == 0
    assert (tmp_path / "a" / "transfer.csv").read_bytes() == (
        (tmp_path / "b" / "transfer.csv").read_bytes()
    )
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (
        (tmp_path / "b" / "manifest.json").read_bytes()
    )


def test_oracle_equiv_small_run(tmp_path):
    resolved = load_config(None, overrides=["experiment.fills=200", "experiment.cases=5"])
    assert run_experiment("oracle_equiv", resolved, tmp_path / "o") == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["mismatches"] == 0


def test_fig10_breakdown(tmp_path):
    resolved = load_config(None)
    assert run_experiment("fig10_breakdown", resolved, tmp_path / "f10") == 0
    rows = (tmp_path / "f10" / "breakdown.csv").read_text().splitlines()
    assert len(rows) == 1 + 2 * 2  # header + 2 kinds x 2 layers


def test_config_charge_kind_flows_through(tmp_path):
    resolved = load_config(None, overrides=["macro.kind=charge", "experiment.trials=5"])
    assert run_experiment("fig8_transfer", resolved, tmp_path / "c") == 0
    lines = (tmp_path / "c" / "transfer.csv").read_text().splitlines()
    # charge-mode transfer is inverted: unsigned mean voltages decrease
    n2cm = [line for line in lines[1:] if line.startswith("n2cm")]
    first_v = float(n2cm[0].split(",")[2])
    last_v = float(n2cm[-1].split(",")[2])
    assert first_v > last_v
