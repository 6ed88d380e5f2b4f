"""INI-style configuration: defaults, file merge, overrides, validation.

Every tunable of the simulator lives in one flat section/key namespace with
typed defaults.  A config file supplies a subset; `--override section.key=v`
wins over the file; the fully resolved mapping is what lands in a run's
manifest, so a manifest always replays byte-identically.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import ConfigError
from .current_array import TiaConfig
from .device_models import FefetResistorCell, MlcFefetCell
from .geometry import check_geometry
from .macro_engine import MacroConfig
from .perf_model import EnergyParams, LatencyParams, default_energy_params


def _default_sections() -> dict:
    resistor = FefetResistorCell()
    mlc = MlcFefetCell()
    tia = TiaConfig()
    energy = default_energy_params()
    latency = LatencyParams()
    return {
        "macro": {
            "kind": "current",
            "weight_bits": 8,
            "seed": 0,
            "rows": 128,
            "cols": 128,
            "banks": 16,
            "rows_per_group": 32,
        },
        "adc": {"bits": 5},
        "device": {
            "vdd_i": resistor.vdd_i,
            "vcm": resistor.vcm,
            "ladder_base_resistance": resistor.ladder_base_resistance,
            "channel_on_resistance": resistor.channel_on_resistance,
            "channel_resistance_sensitivity": resistor.channel_resistance_sensitivity,
            "vth_sigma": resistor.vth_sigma,
            "on_off_ratio": resistor.on_off_ratio,
            "include_off_leakage": resistor.include_off_leakage,
            "transconductance_k": mlc.transconductance_k,
            "base_overdrive": mlc.base_overdrive,
        },
        "charge": {
            "bl_capacitance": 50e-15,
            "v_pre": 1.5,
            "t_pre": 1e-9,
            "t_eval": 0.5e-9,
            "v_supply": 2.0,
        },
        "tia": {
            "feedback_resistance": tia.feedback_resistance,
            "v_rail_low": tia.v_rail_low,
            "v_rail_high": tia.v_rail_high,
        },
        "energy": {
            "e_tia_per_eval": energy.e_tia_per_eval,
            "e_adc_per_bit": energy.e_adc_per_bit,
            "e_digital_per_accum": energy.e_digital_per_accum,
            "e_driver_per_row": energy.e_driver_per_row,
            "v_residual": energy.v_residual,
            "calibration_scale": energy.calibration_scale,
        },
        "latency": {
            "t_pre": latency.t_pre,
            "t_eval": latency.t_eval,
            "t_share": latency.t_share,
            "t_sar_bit": latency.t_sar_bit,
            "t_digital": latency.t_digital,
        },
        "experiment": {
            "trials": 60,
            "samples": 0,  # 0 = whole dataset
            "input_bits": 4,
            "seeds": 5,
            "cases": 200,
            "fills": 10000,
            "adc_sweep": "3,4,5,6,7,8,9",
            "model_dir": "data/digits_mlp",
            "features": "data/digits_test_features.csv",
            "labels": "data/digits_test_labels.csv",
        },
    }


_CHOICES = {("macro", "kind"): ("current", "charge")}


def _parse_value(section: str, key: str, raw, default):
    if isinstance(raw, type(default)) and not isinstance(raw, str):
        value = raw
    else:
        text = str(raw).strip()
        try:
            if isinstance(default, bool):
                lowered = text.lower()
                if lowered in ("1", "true", "yes", "on"):
                    value = True
                elif lowered in ("0", "false", "no", "off"):
                    value = False
                else:
                    raise ValueError(text)
            elif isinstance(default, int):
                value = int(text, 0)
            elif isinstance(default, float):
                value = float(text)
            else:
                value = text
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc
    choices = _CHOICES.get((section, key))
    if choices and value not in choices:
        raise ConfigError(f"[{section}] {key}: must be one of {choices}, got {value!r}")
    return value


def _apply(resolved: dict, section: str, key: str, raw) -> None:
    if section not in resolved:
        raise ConfigError(f"unknown config section [{section}]")
    if key not in resolved[section]:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    resolved[section][key] = _parse_value(section, key, raw, resolved[section][key])


def _validate(resolved: dict) -> None:
    macro = resolved["macro"]
    check_geometry(macro["rows"], macro["cols"], macro["banks"], macro["rows_per_group"])
    if macro["weight_bits"] not in (4, 8):
        raise ConfigError(f"[macro] weight_bits must be 4 or 8, got {macro['weight_bits']}")
    if not 1 <= resolved["adc"]["bits"] <= 12:
        raise ConfigError(f"[adc] bits must be 1..12, got {resolved['adc']['bits']}")
    if not 1 <= resolved["experiment"]["input_bits"] <= 8:
        raise ConfigError("[experiment] input_bits must be 1..8")
    for key in ("ladder_base_resistance", "on_off_ratio"):
        if resolved["device"][key] <= 0:
            raise ConfigError(f"[device] {key} must be positive")
    if resolved["device"]["vth_sigma"] < 0:
        raise ConfigError("[device] vth_sigma must be non-negative")
    for key in ("bl_capacitance", "t_pre", "t_eval"):
        if resolved["charge"][key] <= 0:
            raise ConfigError(f"[charge] {key} must be positive")
    if resolved["experiment"]["trials"] < 1:
        raise ConfigError("[experiment] trials must be >= 1")


def load_config(path=None, overrides=()) -> dict:
    """Resolve defaults, an optional INI file, and key=value overrides."""
    resolved = _default_sections()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            with open(path, "r", encoding="utf-8") as fh:
                parser.read_file(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                _apply(resolved, section, key, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override key must be section.key, got {dotted!r}")
        section, key = dotted.split(".", 1)
        _apply(resolved, section.strip(), key.strip(), raw)
    _validate(resolved)
    return resolved


def validate_config(path) -> dict:
    """Library entry point: parse + range/geometry checks, or diagnostics."""
    if not Path(path).exists():
        raise ConfigError(f"config file not found: {path}")
    return load_config(path)


def macro_config_from(resolved: dict) -> MacroConfig:
    macro, device, charge, tia = (
        resolved["macro"], resolved["device"], resolved["charge"], resolved["tia"]
    )
    return MacroConfig(
        kind=macro["kind"],
        adc_bits=resolved["adc"]["bits"],
        weight_bits=macro["weight_bits"],
        seed=macro["seed"],
        rows=macro["rows"],
        cols=macro["cols"],
        banks=macro["banks"],
        rows_per_group=macro["rows_per_group"],
        resistor_cell=FefetResistorCell(
            vdd_i=device["vdd_i"],
            vcm=device["vcm"],
            ladder_base_resistance=device["ladder_base_resistance"],
            channel_on_resistance=device["channel_on_resistance"],
            channel_resistance_sensitivity=device["channel_resistance_sensitivity"],
            vth_sigma=device["vth_sigma"],
            on_off_ratio=device["on_off_ratio"],
            include_off_leakage=device["include_off_leakage"],
        ),
        mlc_cell=MlcFefetCell(
            transconductance_k=device["transconductance_k"],
            base_overdrive=device["base_overdrive"],
            vth_sigma=device["vth_sigma"],
            on_off_ratio=device["on_off_ratio"],
            include_off_leakage=device["include_off_leakage"],
        ),
        tia=TiaConfig(
            feedback_resistance=tia["feedback_resistance"],
            vcm=device["vcm"],
            v_rail_low=tia["v_rail_low"],
            v_rail_high=tia["v_rail_high"],
        ),
        bl_capacitance=charge["bl_capacitance"],
        v_pre=charge["v_pre"],
        t_pre=charge["t_pre"],
        t_eval=charge["t_eval"],
        v_supply=charge["v_supply"],
        energy_params=energy_params_from(resolved),
        latency_params=latency_params_from(resolved),
    )


def energy_params_from(resolved: dict) -> EnergyParams:
    energy, charge = resolved["energy"], resolved["charge"]
    return EnergyParams(
        e_tia_per_eval=energy["e_tia_per_eval"],
        e_adc_per_bit=energy["e_adc_per_bit"],
        e_digital_per_accum=energy["e_digital_per_accum"],
        e_driver_per_row=energy["e_driver_per_row"],
        bl_capacitance=charge["bl_capacitance"],
        v_pre=charge["v_pre"],
        v_residual=energy["v_residual"],
        calibration_scale=energy["calibration_scale"],
    )


def latency_params_from(resolved: dict) -> LatencyParams:
    latency = resolved["latency"]
    return LatencyParams(
        t_pre=latency["t_pre"],
        t_eval=latency["t_eval"],
        t_share=latency["t_share"],
        t_sar_bit=latency["t_sar_bit"],
        t_digital=latency["t_digital"],
    )
