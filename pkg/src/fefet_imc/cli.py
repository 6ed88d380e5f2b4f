"""Experiment runner: reproduces the reference studies as CSV/JSON artifacts.

Every run writes a manifest.json capturing the experiment id, seed, and the
fully resolved configuration next to the result files, so any artifact can
be replayed byte-identically.  Exit codes: 0 success, 1 invariant violation
detected during the run, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod, perf_model
from .charge_array import ChgfeBlock, charge_share, evaluate_bls, precharge
from .current_array import CurfeBlock, evaluate_curfe_block
from .device_models import cell_current_curfe, cell_delta_v_chgfe
from .encoding import MODE_SIGNED, MODE_UNSIGNED
from .errors import ConfigError, SimulatorError
from .geometry import GROUPS, KIND_CHARGE, KIND_CURRENT, KIND_HIGH, KIND_LOW, NIBBLE_BITS
from .macro_engine import (
    matvec_batch,
    monte_carlo_transfer,
    program_macro,
    table_from_outputs,
    transfer_trial_outputs,
)
from .nn_harness import load_dataset, load_model, model_schedule, run_inference
from .oracles import exact_dot
from .rng import derive_seed, gaussian_for_cells

EXPERIMENTS = (
    "fig3_example",
    "fig5_example",
    "fig6_hist",
    "fig7_efficiency",
    "fig8_transfer",
    "fig9_accuracy",
    "fig10_breakdown",
    "oracle_equiv",
)

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("FEFET_IMC_WORKERS", "1")))
    except ValueError:
        return 1


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_manifest(out: Path, experiment: str, resolved: dict) -> None:
    write_json(out / "manifest.json", {
        "experiment": experiment,
        "seed": resolved["macro"]["seed"],
        "config": resolved,
        "version": __version__,
    })


def _one_hot_row(rows: int) -> np.ndarray:
    x = np.zeros(rows, dtype=np.uint8)
    x[0] = 1
    return x


def _nibble_bits(value: int) -> np.ndarray:
    return np.array([(value >> j) & 1 for j in range(NIBBLE_BITS)], dtype=np.uint8)


def _worked_example_blocks(value_high: int = 0xF, value_low: int = 0xF):
    """Stored patterns for the one-row, weight 11111111 example."""
    high = np.zeros((32, NIBBLE_BITS), dtype=np.uint8)
    low = np.zeros((32, NIBBLE_BITS), dtype=np.uint8)
    high[0] = _nibble_bits(value_high)
    low[0] = _nibble_bits(value_low)
    return high, low


def run_fig3(resolved: dict, out: Path) -> int:
    """Single-row current-mode worked example, with per-cell trace."""
    cfg = config_mod.macro_config_from(resolved)
    high_bits, low_bits = _worked_example_blocks()
    zeros = np.zeros((32, NIBBLE_BITS))
    x = _one_hot_row(32)
    exact_cell = replace(cfg.resistor_cell, channel_on_resistance=0.0, include_off_leakage=False)
    chan_cell = replace(cfg.resistor_cell, include_off_leakage=False)
    rows, trace, failures = [], [], []
    for variant, cell in (("ladder_only", exact_cell), ("with_channel", chan_cell)):
        for kind, bits, expected in ((KIND_HIGH, high_bits, -100e-9), (KIND_LOW, low_bits, 1.5e-6)):
            block = CurfeBlock(kind=kind, stored_bits=bits, deviations=zeros, device=cell)
            res = evaluate_curfe_block(block, x, cfg.tia, collect_cells=True)
            if variant == "ladder_only":
                ok = abs(res.net_current - expected) <= 1e-12
            else:
                ok = abs(res.net_current - expected) <= 0.02 * abs(expected)
            if not ok:
                failures.append(f"{variant}/{kind}: {res.net_current} vs {expected}")
            rows.append((variant, kind, res.net_current, res.voltage, expected, ok))
            for r in range(32):
                for bit in range(NIBBLE_BITS):
                    trace.append((variant, kind, r, bit, res.cell_currents[r, bit]))
    write_csv(out / "results.csv",
              ["variant", "block", "net_current_a", "voltage_v", "expected_a", "within_tolerance"],
              rows)
    write_csv(out / "trace.csv", ["variant", "block", "row", "bit", "current_a"], trace)
    write_json(out / "summary.json", {"failures": failures})
    return EXIT_INVARIANT if failures else EXIT_OK


def run_fig5(resolved: dict, out: Path) -> int:
    """Single-row charge-mode worked example: per-phase bitline voltages."""
    cfg = config_mod.macro_config_from(resolved)
    cell = replace(cfg.mlc_cell, include_off_leakage=False)
    high_bits, low_bits = _worked_example_blocks()
    zeros = np.zeros((32, NIBBLE_BITS))
    x = _one_hot_row(32)
    expected = {KIND_HIGH: 1.50025, KIND_LOW: 1.49625}
    rows, shared_rows, failures = [], [], []
    for kind, bits in ((KIND_HIGH, high_bits), (KIND_LOW, low_bits)):
        block = ChgfeBlock(
            kind=kind, stored_bits=bits, deviations=zeros, device=cell,
            bl_capacitance=cfg.bl_capacitance, v_pre=cfg.v_pre,
            t_pre=cfg.t_pre, t_eval=cfg.t_eval, v_supply=cfg.v_supply,
        )
        state = precharge(block)
        for bl in range(NIBBLE_BITS):
            rows.append((kind, "precharge", bl, state.voltages[bl]))
        state = evaluate_bls(block, x, state)
        for bl in range(NIBBLE_BITS):
            rows.append((kind, "evaluate", bl, state.voltages[bl]))
        shared = charge_share(state)
        for bl in range(NIBBLE_BITS):
            rows.append((kind, "share", bl, shared))
        ok = abs(shared - expected[kind]) <= 1e-9
        if not ok:
            failures.append(f"{kind}: shared {shared} vs {expected[kind]}")
        shared_rows.append((kind, shared, expected[kind], ok))
    write_csv(out / "waveform.csv", ["block", "phase", "bitline", "voltage_v"], rows)
    write_csv(out / "results.csv",
              ["block", "shared_voltage_v", "expected_v", "within_tolerance"], shared_rows)
    write_json(out / "summary.json", {"failures": failures})
    return EXIT_INVARIANT if failures else EXIT_OK


def run_fig6(resolved: dict, out: Path) -> int:
    """ON-current histograms per cell significance under Vth variation."""
    cfg = config_mod.macro_config_from(resolved)
    trials = resolved["experiment"]["trials"]
    seed = resolved["macro"]["seed"]
    draws = np.arange(trials)
    rows = []
    stats = {}
    for kind in (KIND_CURRENT, KIND_CHARGE):
        for cell_index in range(8):  # 0..3 low nibble, 4..7 high nibble
            bit = cell_index % NIBBLE_BITS
            is_sign = cell_index == 7
            dev = gaussian_for_cells(derive_seed(seed, cell_index), draws, cell_index,
                                     cfg.resistor_cell.vth_sigma)
            if kind == KIND_CURRENT:
                current = cell_current_curfe(cfg.resistor_cell, bit, is_sign, 1, 1, dev)
            else:
                dv = cell_delta_v_chgfe(cfg.mlc_cell, bit, is_sign, 1, 1, dev,
                                        cfg.t_eval, cfg.bl_capacitance)
                current = dv * cfg.bl_capacitance / cfg.t_eval  # back to amps
            for t in range(trials):
                rows.append((kind, cell_index, t, current[t]))
            mag = np.abs(current)
            stats[f"{kind}/cell{cell_index}"] = {
                "mean_a": float(np.mean(np.asarray(current))),
                "rel_std": float(mag.std(ddof=1) / mag.mean()) if trials > 1 else 0.0,
            }
    failures = []
    if trials > 1 and cfg.resistor_cell.vth_sigma > 0:
        for cell_index in range(8):
            rc = stats[f"{KIND_CURRENT}/cell{cell_index}"]["rel_std"]
            qc = stats[f"{KIND_CHARGE}/cell{cell_index}"]["rel_std"]
            if rc >= qc:
                failures.append(f"cell{cell_index}: resistor rel std {rc} !< square-law {qc}")
    write_csv(out / "histogram.csv", ["kind", "cell", "trial", "current_a"], rows)
    write_json(out / "summary.json", {"stats": stats, "failures": failures})
    return EXIT_INVARIANT if failures else EXIT_OK


def _r_squared(x: np.ndarray, y: np.ndarray) -> float:
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    total = y - y.mean()
    return float(1.0 - (residuals @ residuals) / (total @ total))


def _transfer_chunk(args):
    cfg, mode, count, offset = args
    _, outs = transfer_trial_outputs(cfg, mode, count, None, offset)
    return offset, outs


def run_fig8(resolved: dict, out: Path) -> int:
    """Monte Carlo transfer sweep over the full 1-bit x 4-bit range."""
    cfg = config_mod.macro_config_from(resolved)
    trials = resolved["experiment"]["trials"]
    workers = worker_count()
    rows, summary, failures = [], {}, []
    for mode in (MODE_SIGNED, MODE_UNSIGNED):
        if workers > 1:
            chunk = -(-trials // workers)
            jobs = [(cfg, mode, min(chunk, trials - start), start)
                    for start in range(0, trials, chunk)]
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = sorted(pool.map(_transfer_chunk, jobs), key=lambda p: p[0])
            outs = np.vstack([p[1] for p in parts])
            targets, _ = transfer_trial_outputs(cfg, mode, 1)
            table = table_from_outputs(mode, targets, outs)
        else:
            table = monte_carlo_transfer(cfg, mode, trials)
        for target, mean, std in zip(table.targets, table.mean_voltage, table.std_voltage):
            rows.append((mode, target, mean, std))
        r2 = _r_squared(table.targets.astype(float), table.mean_voltage)
        summary[mode] = {"r_squared": r2, "trials": trials}
        sigma = cfg.sigma
        if sigma == 0.0 and r2 < 0.9999:
            failures.append(f"{mode}: r_squared {r2} < 0.9999 at sigma=0")
        if cfg.kind == KIND_CURRENT and 0.0 < sigma <= 0.045 and r2 < 0.999:
            failures.append(f"{mode}: r_squared {r2} < 0.999 for current mode at sigma={sigma}")
    write_csv(out / "transfer.csv", ["mode", "target", "mean_voltage_v", "std_voltage_v"], rows)
    write_json(out / "summary.json", {"fits": summary, "failures": failures})
    return EXIT_INVARIANT if failures else EXIT_OK


def run_fig7(resolved: dict, out: Path) -> int:
    """Efficiency and latency across input/weight precision for both kinds."""
    energy = config_mod.energy_params_from(resolved)
    latency = config_mod.latency_params_from(resolved)
    adc_bits = resolved["adc"]["bits"]
    grid = {}
    rows = []
    for kind in (KIND_CURRENT, KIND_CHARGE):
        for wb in (4, 8):
            for m in (1, 2, 4, 8):
                eff = perf_model.tops_per_watt(kind, m, wb, adc_bits, energy)
                e = perf_model.energy_of_matvec(kind, m, wb, adc_bits, energy)
                lat = perf_model.latency_of_matvec(kind, m, GROUPS, adc_bits, latency)
                grid[(kind, m, wb)] = eff
                rows.append((kind, m, wb, e, lat, eff))
    failures = []
    for kind in (KIND_CURRENT, KIND_CHARGE):
        for wb in (4, 8):
            effs = [grid[(kind, m, wb)] for m in (1, 2, 4, 8)]
            if any(a < b for a, b in zip(effs, effs[1:])):
                failures.append(f"{kind}/{wb}b: efficiency not non-increasing in input bits")
        for m in (1, 2, 4, 8):
            if grid[(kind, m, 4)] < grid[(kind, m, 8)]:
                failures.append(f"{kind}/{m}b: efficiency increased with weight precision")
    for wb in (4, 8):
        for m in (1, 2, 4, 8):
            if grid[(KIND_CHARGE, m, wb)] <= grid[(KIND_CURRENT, m, wb)]:
                failures.append(f"{m}b/{wb}b: charge mode not more efficient")
    if perf_model.latency_of_matvec(KIND_CHARGE, 8, GROUPS, adc_bits, latency) <= (
        perf_model.latency_of_matvec(KIND_CURRENT, 8, GROUPS, adc_bits, latency)
    ):
        failures.append("charge-mode matvec latency not above current mode")
    write_csv(out / "efficiency.csv",
              ["kind", "input_bits", "weight_bits", "energy_j", "latency_s", "tops_per_watt"],
              rows)
    write_json(out / "summary.json", {
        "anchor_current_8b8b": grid[(KIND_CURRENT, 8, 8)],
        "anchor_charge_8b8b": grid[(KIND_CHARGE, 8, 8)],
        "failures": failures,
    })
    return EXIT_INVARIANT if failures else EXIT_OK


def _load_nn_inputs(resolved: dict):
    exp = resolved["experiment"]
    layers = load_model(Path(exp["model_dir"]) / "model.json")
    features, labels = load_dataset(exp["features"], exp["labels"])
    limit = exp["samples"]
    if limit:
        features, labels = features[:limit], labels[:limit]
    return layers, features, labels


def run_fig9(resolved: dict, out: Path) -> int:
    """Accuracy vs ADC resolution, plus device-variation comparison."""
    cfg = config_mod.macro_config_from(resolved)
    exp = resolved["experiment"]
    layers, features, labels = _load_nn_inputs(resolved)
    adc_sweep = [int(b) for b in str(exp["adc_sweep"]).split(",") if b.strip()]
    seeds = [derive_seed(resolved["macro"]["seed"], i) for i in range(exp["seeds"])]
    sigma = cfg.sigma if cfg.sigma > 0 else 0.040
    sweep = [
        {"adc_bits": bits, "sigma": 0.0, "kind": cfg.kind, "seed": seed}
        for bits in adc_sweep for seed in seeds
    ]
    sweep += [
        {"adc_bits": 5, "sigma": sigma, "kind": kind, "seed": seed}
        for kind in (KIND_CURRENT, KIND_CHARGE) for seed in seeds
    ]
    report = run_inference(layers, features, labels, cfg, sweep)
    rows = [
        (p.kind, p.adc_bits, p.sigma, p.seed, p.accuracy, p.energy_joules, p.latency_seconds)
        for p in report.points
    ]
    write_csv(out / "grid.csv",
              ["kind", "adc_bits", "sigma", "seed", "accuracy", "energy_j", "latency_s"],
              rows)
    failures = []
    if 9 in adc_sweep:
        acc9 = report.accuracy_of(adc_bits=9, sigma=0.0)
        if any(a != report.reference_accuracy for a in acc9):
            failures.append(
                f"9-bit accuracy {acc9} differs from integer reference {report.reference_accuracy}"
            )
    means = {
        bits: float(np.mean(report.accuracy_of(adc_bits=bits, sigma=0.0)))
        for bits in adc_sweep
    }
    write_json(out / "report.json", {
        "reference_accuracy": report.reference_accuracy,
        "mean_accuracy_by_adc_bits": {str(k): v for k, v in means.items()},
        "samples": int(len(features)),
        "failures": failures,
    })
    return EXIT_INVARIANT if failures else EXIT_OK


def run_fig10(resolved: dict, out: Path) -> int:
    """Per-layer energy/latency breakdown of the shipped network."""
    cfg = config_mod.macro_config_from(resolved)
    energy = config_mod.energy_params_from(resolved)
    latency = config_mod.latency_params_from(resolved)
    layers, features, _ = _load_nn_inputs(resolved)
    schedule = model_schedule(layers, cfg, samples=1)
    rows, failures = [], []
    for kind in (KIND_CURRENT, KIND_CHARGE):
        table = perf_model.layer_breakdown(schedule, kind, cfg.adc_bits, energy, latency)
        for entry in table:
            rows.append((
                kind, entry["name"], entry["matvecs"], entry["energy_array"],
                entry["energy_adc"], entry["energy_digital"], entry["energy_total"],
                entry["latency_total"],
            ))
            parts = entry["energy_array"] + entry["energy_adc"] + entry["energy_digital"]
            if abs(parts - entry["energy_total"]) > 1e-18 + 1e-9 * entry["energy_total"]:
                failures.append(f"{kind}/{entry['name']}: component sum != total")
    write_csv(out / "breakdown.csv",
              ["kind", "layer", "matvecs", "energy_array_j", "energy_adc_j",
               "energy_digital_j", "energy_total_j", "latency_s"],
              rows)
    write_json(out / "summary.json", {"samples": int(len(features)), "failures": failures})
    return EXIT_INVARIANT if failures else EXIT_OK


def run_oracle_equiv(resolved: dict, out: Path) -> int:
    """Exact-equality run: lossless ADC, zero variation, leakage off."""
    base = config_mod.macro_config_from(resolved)
    exp = resolved["experiment"]
    seed = resolved["macro"]["seed"]
    rng = np.random.default_rng(seed)
    rows, mismatches = [], 0
    fill_target = exp["fills"]
    for kind in (KIND_CURRENT, KIND_CHARGE):
        cfg = replace(
            base, kind=kind, adc_bits=9,
            resistor_cell=replace(base.resistor_cell, vth_sigma=0.0, include_off_leakage=False),
            mlc_cell=replace(base.mlc_cell, vth_sigma=0.0, include_off_leakage=False),
        )
        # randomized 4-bit fills, 64 32-row blocks per matvec
        cfg4 = replace(cfg, weight_bits=4)
        fill_runs = -(-fill_target // (cfg.banks * GROUPS))
        bad = 0
        seen = np.zeros((16, 2), dtype=bool)
        for _ in range(fill_runs):
            w = rng.integers(-8, 8, size=(cfg.rows, cfg.banks))
            x = rng.integers(0, 2, size=cfg.rows)
            for value in range(-8, 8):
                for xv in (0, 1):
                    if np.any(w[x == xv] == value):
                        seen[value + 8, xv] = True
            outputs, _ = matvec_batch(program_macro(w, cfg4), x[None, :], 1)
            expected = np.array([exact_dot(x, w[:, b]) for b in range(cfg.banks)])
            bad += int(np.sum(outputs[0] != expected))
        rows.append((kind, "nibble_fills", fill_runs * cfg.banks * GROUPS, bad))
        mismatches += bad
        if not seen.all():
            mismatches += 1
            rows.append((kind, "coverage_missing", int((~seen).sum()), 1))
        # full random 8-bit matvecs
        bad = 0
        for _ in range(exp["cases"]):
            w = rng.integers(-128, 128, size=(cfg.rows, cfg.banks))
            x = rng.integers(0, 256, size=cfg.rows)
            outputs, _ = matvec_batch(program_macro(w, cfg), x[None, :], 8)
            expected = np.array([exact_dot(x, w[:, b]) for b in range(cfg.banks)])
            bad += int(np.sum(outputs[0] != expected))
        rows.append((kind, "full_matvecs", exp["cases"], bad))
        mismatches += bad
    write_csv(out / "results.csv", ["kind", "stage", "count", "mismatches"], rows)
    write_json(out / "summary.json", {"mismatches": mismatches})
    return EXIT_INVARIANT if mismatches else EXIT_OK


_RUNNERS = {
    "fig3_example": run_fig3,
    "fig5_example": run_fig5,
    "fig6_hist": run_fig6,
    "fig7_efficiency": run_fig7,
    "fig8_transfer": run_fig8,
    "fig9_accuracy": run_fig9,
    "fig10_breakdown": run_fig10,
    "oracle_equiv": run_oracle_equiv,
}


def run_experiment(experiment: str, resolved: dict, out_dir) -> int:
    """Execute one experiment; writes manifest + artifacts into out_dir."""
    if experiment not in _RUNNERS:
        raise ConfigError(f"unknown experiment id: {experiment!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(out, experiment, resolved)
    return _RUNNERS[experiment](resolved, out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fefet-imc",
        description="Run simulator experiments and write CSV/JSON artifacts.",
    )
    parser.add_argument("--experiment", choices=EXPERIMENTS, help="experiment to run")
    parser.add_argument("--config", help="INI config file; defaults are used when omitted")
    parser.add_argument("--seed", type=int, help="overrides [macro] seed")
    parser.add_argument("--out", default="runs/latest", help="output directory")
    parser.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="config override, repeatable")
    parser.add_argument("--check-config", metavar="PATH",
                        help="validate a config file, echo the resolved values, and exit")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.check_config:
            resolved = config_mod.validate_config(args.check_config)
            json.dump(resolved, sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
            return EXIT_OK
        if not args.experiment:
            parser.error("--experiment is required (or use --check-config)")
        overrides = list(args.override)
        if args.seed is not None:
            overrides.append(f"macro.seed={args.seed}")
        resolved = config_mod.load_config(args.config, overrides)
        return run_experiment(args.experiment, resolved, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
