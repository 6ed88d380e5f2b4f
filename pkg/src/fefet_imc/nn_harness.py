"""Quantized MLP inference over the simulated macros.

Layers are integer weight matrices fed unsigned activations; every layer is
tiled onto 128 x 16 macro invocations (zero-padded), partial results are
summed digitally, and inter-layer requantization rescales ReLU outputs to
the next layer's activation precision with a calibration-derived floating
scale.  A pure-integer reference path implements the identical pipeline with
exact MACs, so accuracy differences isolate ADC and device effects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import perf_model
from .encoding import read_int_matrix
from .errors import ConfigError, MappingError
from .geometry import GROUPS
from .macro_engine import MacroConfig, matvec_batch, program_macro

ACT_RELU = "relu"
ACT_IDENTITY = "identity"


@dataclass
class QuantLayer:
    weights: np.ndarray  # (in_features, out_features) integers
    weight_bits: int = 8
    input_bits: int = 4  # precision of the activations feeding this layer
    activation: str = ACT_RELU
    requant_scale: float | None = None  # None on the last layer
    out_bits: int | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.int64)
        if self.weights.ndim != 2 or self.weights.size == 0:
            raise ConfigError("layer weights must be a non-empty 2-d matrix")
        if self.activation not in (ACT_RELU, ACT_IDENTITY):
            raise ConfigError(f"unknown activation: {self.activation!r}")
        limit = 1 << (self.weight_bits - 1)
        if self.weights.min() < -limit or self.weights.max() >= limit:
            raise ConfigError(f"weights exceed signed {self.weight_bits}-bit range")


@dataclass
class LayerSchedule:
    row_tiles: int
    col_tiles: int

    @property
    def matvecs_per_sample(self) -> int:
        return self.row_tiles * self.col_tiles


def tile_layer(layer: QuantLayer, cfg: MacroConfig) -> LayerSchedule:
    """Macro invocations covering the layer, partial tiles zero-padded."""
    rows, cols = layer.weights.shape
    return LayerSchedule(
        row_tiles=-(-rows // cfg.rows),
        col_tiles=-(-cols // cfg.banks),
    )


def load_model(model_json) -> list[QuantLayer]:
    """Load the layers of a quantized model description file."""
    path = Path(model_json)
    spec = json.loads(path.read_text())
    layers = []
    for entry in spec["layers"]:
        weights, precision = read_int_matrix(path.parent / entry["weights"])
        layers.append(QuantLayer(
            weights=weights,
            weight_bits=precision,
            input_bits=entry.get("input_bits", spec.get("input_bits", 4)),
            activation=entry["activation"],
            requant_scale=entry.get("requant_scale"),
            out_bits=entry.get("out_bits"),
        ))
    return layers


def load_dataset(features_csv, labels_csv) -> tuple[np.ndarray, np.ndarray]:
    features, precision = read_int_matrix(features_csv)
    labels, _ = read_int_matrix(labels_csv)
    if features.min() < 0 or features.max() >= (1 << precision):
        raise ConfigError("dataset features exceed their declared precision")
    if labels.shape != (features.shape[0], 1):
        raise MappingError("labels must be a single column matching the feature rows")
    return features, labels[:, 0]


def requantize(raw: np.ndarray, layer: QuantLayer) -> np.ndarray:
    """Activation + rescale to the next layer's precision."""
    out = np.maximum(raw, 0) if layer.activation == ACT_RELU else raw
    if layer.requant_scale is None:
        return out
    if layer.out_bits is None:
        raise ConfigError("requant_scale set without out_bits")
    levels = (1 << layer.out_bits) - 1
    return np.clip(np.rint(out / layer.requant_scale), 0, levels).astype(np.int64)


def reference_layer(layer: QuantLayer, x: np.ndarray) -> np.ndarray:
    """Exact integer MACs for a batch of activation vectors."""
    return np.asarray(x, dtype=np.int64) @ layer.weights


def simulate_layer(layer: QuantLayer, x: np.ndarray, cfg: MacroConfig) -> np.ndarray:
    """Layer MACs through the macro simulator, tiled and digitally merged."""
    x = np.asarray(x, dtype=np.int64)
    rows, cols = layer.weights.shape
    schedule = tile_layer(layer, cfg)
    out = np.zeros((x.shape[0], cols), dtype=np.int64)
    tile_cfg = cfg if cfg.weight_bits == layer.weight_bits else replace(
        cfg, weight_bits=layer.weight_bits
    )
    for ct in range(schedule.col_tiles):
        c0 = ct * cfg.banks
        c1 = min(c0 + cfg.banks, cols)
        for rt in range(schedule.row_tiles):
            r0 = rt * cfg.rows
            r1 = min(r0 + cfg.rows, rows)
            tile = np.zeros((cfg.rows, cfg.banks), dtype=np.int64)
            tile[: r1 - r0, : c1 - c0] = layer.weights[r0:r1, c0:c1]
            macro = program_macro(tile, tile_cfg)
            x_pad = np.zeros((x.shape[0], cfg.rows), dtype=np.int64)
            x_pad[:, : r1 - r0] = x[:, r0:r1]
            outputs, _ = matvec_batch(macro, x_pad, layer.input_bits)
            out[:, c0:c1] += outputs[:, : c1 - c0]
    return out


def run_model(layers, x, layer_fn) -> np.ndarray:
    """Push a batch through all layers; returns the final integer logits."""
    acts = np.asarray(x, dtype=np.int64)
    for layer in layers:
        acts = requantize(layer_fn(layer, acts), layer)
    return acts


def predict_reference(layers, x) -> np.ndarray:
    return np.argmax(run_model(layers, x, reference_layer), axis=1)


def predict_simulated(layers, x, cfg: MacroConfig) -> np.ndarray:
    logits = run_model(layers, x, lambda layer, acts: simulate_layer(layer, acts, cfg))
    return np.argmax(logits, axis=1)


def model_schedule(layers, cfg: MacroConfig, samples: int = 1) -> list[dict]:
    """Per-layer matvec counts in the form the perf model consumes."""
    return [
        {
            "name": f"fc{i + 1}",
            "matvecs": tile_layer(layer, cfg).matvecs_per_sample * samples,
            "input_bits": layer.input_bits,
            "weight_bits": layer.weight_bits,
        }
        for i, layer in enumerate(layers)
    ]


@dataclass
class SweepPoint:
    adc_bits: int
    sigma: float
    kind: str
    seed: int
    accuracy: float
    energy_joules: float
    latency_seconds: float


@dataclass
class InferenceReport:
    reference_accuracy: float
    points: list[SweepPoint]

    def accuracy_of(self, **match) -> list[float]:
        out = []
        for p in self.points:
            if all(getattr(p, k) == v for k, v in match.items()):
                out.append(p.accuracy)
        return out


def _cfg_for_point(base: MacroConfig, kind: str, adc_bits: int, sigma: float, seed: int) -> MacroConfig:
    return replace(
        base,
        kind=kind,
        adc_bits=adc_bits,
        seed=seed,
        resistor_cell=replace(base.resistor_cell, vth_sigma=sigma),
        mlc_cell=replace(base.mlc_cell, vth_sigma=sigma),
    )


def run_inference(layers, features, labels, base_cfg: MacroConfig, sweep) -> InferenceReport:
    """Accuracy grid over sweep points plus the integer-reference baseline.

    `sweep` is an iterable of dicts with adc_bits, sigma, kind, and seed.
    """
    if len(features) == 0:
        raise ConfigError("empty dataset")
    reference = float(np.mean(predict_reference(layers, features) == labels))
    points = []
    for point in sweep:
        cfg = _cfg_for_point(base_cfg, point["kind"], point["adc_bits"],
                             point["sigma"], point["seed"])
        predicted = predict_simulated(layers, features, cfg)
        schedule = model_schedule(layers, cfg, samples=len(features))
        energy = sum(
            perf_model.energy_of_matvec(cfg.kind, e["input_bits"], e["weight_bits"],
                                        cfg.adc_bits, cfg.energy_params) * e["matvecs"]
            for e in schedule
        )
        latency = sum(
            perf_model.latency_of_matvec(cfg.kind, e["input_bits"], GROUPS,
                                         cfg.adc_bits, cfg.latency_params) * e["matvecs"]
            for e in schedule
        )
        points.append(SweepPoint(
            adc_bits=point["adc_bits"],
            sigma=point["sigma"],
            kind=point["kind"],
            seed=point["seed"],
            accuracy=float(np.mean(predicted == labels)),
            energy_joules=energy,
            latency_seconds=latency,
        ))
    return InferenceReport(reference_accuracy=reference, points=points)
