"""Analytic sensor+compute power model.

Average power of a periodically-inferring model is

    P = alpha * N / T + beta * B / T + sum_m gamma_m * delta_m

with N the MACs per forward pass, B the bytes moved (inputs + outputs +
parameters of each operation, 4 bytes per value), T the seconds between
inferences, and gamma_m the draw of each active sensor at duty delta_m.
MAC and byte totals are computed in closed form from an architecture
description (a list of layer dicts), replacing framework profilers; byte
totals are therefore an approximation and full-scale reproductions of
published power numbers carry a tolerance band.

Unit discipline: alpha/beta are pJ per MAC/byte; 1 pJ/s = 1e-9 mW.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

PJ_PER_S_TO_MW = 1e-9

KNOWN_SENSORS = ("rgb", "imu", "audio", "eye")

LAYER_KINDS = ("linear", "conv2d", "norm", "attention", "mlp")


@dataclass
class PowerConstants:
    """Energy coefficients for smart-glasses-class hardware.

    Overridable via config; overrides should note their provenance since
    downstream reports quote these numbers.
    """

    alpha_pj_per_mac: float = 4.6
    beta_pj_per_byte: float = 80.0
    gamma_mw: dict[str, float] = field(
        default_factory=lambda: {"rgb": 35.0, "imu": 1.2, "audio": 0.3, "eye": 7.8}
    )
    provenance: str = "published smart-glasses component estimates"

    def __post_init__(self):
        if self.alpha_pj_per_mac <= 0 or self.beta_pj_per_byte <= 0:
            raise ConfigError("alpha and beta must be positive")
        for name, g in self.gamma_mw.items():
            if g <= 0:
                raise ConfigError(f"gamma for sensor '{name}' must be positive")


@dataclass
class PowerProfile:
    """One model's per-inference workload and sensing needs."""

    macs_n: int
    bytes_b: int
    interval_t_s: float
    sensors: dict[str, float]  # sensor name -> duty fraction in [0, 1]

    def __post_init__(self):
        if self.interval_t_s <= 0:
            raise ConfigError("inference interval T must be > 0")
        for name, duty in self.sensors.items():
            if not 0.0 <= duty <= 1.0:
                raise ConfigError(f"sensor '{name}' duty {duty} outside [0, 1]")


def _require(layer: dict, *keys: str) -> None:
    for k in keys:
        if k not in layer:
            raise ConfigError(f"layer kind '{layer.get('kind')}' missing field '{k}'")


def _macs_of_layer(layer: dict) -> int:
    kind = layer.get("kind")
    g = layer.get("groups", 1)
    if kind == "linear":
        _require(layer, "d_in", "d_out")
        return g * layer.get("tokens", 1) * layer["d_in"] * layer["d_out"]
    if kind == "conv2d":
        _require(layer, "c_in", "c_out", "kernel", "out_h", "out_w")
        return (
            g
            * layer["out_h"]
            * layer["out_w"]
            * layer["kernel"] ** 2
            * layer["c_in"]
            * layer["c_out"]
        )
    if kind == "norm":
        return 0
    if kind == "attention":
        _require(layer, "hidden", "tokens")
        n, d = layer["tokens"], layer["hidden"]
        macs = 3 * n * d * d + n * n * d + n * n * d + n * d * d
        if layer.get("include_ffn", True):
            r = layer.get("ffn_mult", 4)
            macs += 2 * int(r * d) * n * d
        return g * macs
    if kind == "mlp":
        _require(layer, "widths")
        n = layer.get("tokens", 1)
        w = layer["widths"]
        return g * sum(n * w[i] * w[i + 1] for i in range(len(w) - 1))
    raise ConfigError(f"unsupported layer kind '{kind}'")


def _linear_vals(tokens: int, d_in: int, d_out: int, bias: bool = True):
    """(activation values, parameter values) of one linear op."""
    return tokens * (d_in + d_out), d_in * d_out + (d_out if bias else 0)


def _bytes_of_layer(layer: dict) -> int:
    """Values touched by the layer's ops (inputs + outputs + parameters).

    Grouped ops (e.g. per-frame attention) run as one batched kernel, so
    activations scale with the group count while parameters are read once.
    """
    kind = layer.get("kind")
    g = layer.get("groups", 1)
    if kind == "linear":
        _require(layer, "d_in", "d_out")
        act, par = _linear_vals(
            layer.get("tokens", 1), layer["d_in"], layer["d_out"], layer.get("bias", True)
        )
    elif kind == "conv2d":
        _require(layer, "c_in", "c_out", "kernel", "out_h", "out_w", "in_h", "in_w")
        act = (
            layer["c_in"] * layer["in_h"] * layer["in_w"]
            + layer["c_out"] * layer["out_h"] * layer["out_w"]
        )
        par = layer["kernel"] ** 2 * layer["c_in"] * layer["c_out"] + layer["c_out"]
    elif kind == "norm":
        _require(layer, "tokens", "dim")
        act = 2 * layer["tokens"] * layer["dim"]
        par = 2 * layer["dim"]
    elif kind == "attention":
        _require(layer, "hidden", "tokens", "heads")
        n, d, h = layer["tokens"], layer["hidden"], layer["heads"]
        act = 2 * n * d  # pre-attention norm
        par = 2 * d
        a, p = _linear_vals(n, d, 3 * d)  # qkv projection
        act, par = act + a, par + p
        act += 2 * n * d + h * n * n  # scores: q,k in, head maps out
        act += 2 * h * n * n  # softmax in/out
        act += h * n * n + n * d + n * d  # weighted sum
        a, p = _linear_vals(n, d, d)  # output projection
        act, par = act + a, par + p
        if layer.get("include_ffn", True):
            r = int(layer.get("ffn_mult", 4) * d)
            act += 2 * n * d  # second norm
            par += 2 * d
            for a, p in (_linear_vals(n, d, r), _linear_vals(n, r, d)):
                act, par = act + a, par + p
    elif kind == "mlp":
        _require(layer, "widths")
        n = layer.get("tokens", 1)
        w = layer["widths"]
        act = par = 0
        for i in range(len(w) - 1):
            a, p = _linear_vals(n, w[i], w[i + 1])
            act, par = act + a, par + p
    else:
        raise ConfigError(f"unsupported layer kind '{kind}'")
    return 4 * (g * act + par)


def count_macs(arch: list[dict]) -> int:
    """Closed-form MAC count of a forward pass (norms count as 0)."""
    return sum(_macs_of_layer(layer) for layer in arch)


def estimate_bytes(arch: list[dict]) -> int:
    """Analytic read/write byte estimate: 4 bytes per value touched."""
    return sum(_bytes_of_layer(layer) for layer in arch)


@dataclass
class PowerBreakdown:
    compute_mw: float
    memory_mw: float
    sensor_mw: float
    per_sensor_mw: dict[str, float]

    @property
    def total_mw(self) -> float:
        return self.compute_mw + self.memory_mw + self.sensor_mw


def power_mw(profile: PowerProfile, consts: PowerConstants | None = None) -> PowerBreakdown:
    """Average power in milliwatts with the three terms itemized."""
    consts = consts or PowerConstants()
    if profile.interval_t_s <= 0:
        raise ConfigError("inference interval T must be > 0")
    per_sensor = {}
    for name, duty in profile.sensors.items():
        if name not in consts.gamma_mw:
            raise ConfigError(f"unknown sensor '{name}'")
        per_sensor[name] = consts.gamma_mw[name] * duty
    return PowerBreakdown(
        compute_mw=consts.alpha_pj_per_mac * profile.macs_n / profile.interval_t_s * PJ_PER_S_TO_MW,
        memory_mw=consts.beta_pj_per_byte * profile.bytes_b / profile.interval_t_s * PJ_PER_S_TO_MW,
        sensor_mw=sum(per_sensor.values()),
        per_sensor_mw=per_sensor,
    )


# ---------------------------------------------------------------------------
# architecture builders


def transformer_arch(
    layers: int, hidden: int, tokens: int, heads: int, ffn_mult: int = 4
) -> list[dict]:
    """Standard pre-LN transformer encoder stack plus a final norm."""
    arch = [
        {
            "kind": "attention",
            "hidden": hidden,
            "tokens": tokens,
            "heads": heads,
            "ffn_mult": ffn_mult,
            "include_ffn": True,
        }
        for _ in range(layers)
    ]
    arch.append({"kind": "norm", "tokens": tokens, "dim": hidden})
    return arch


def divided_st_arch(
    layers: int,
    hidden: int,
    frames: int,
    patches: int,
    heads: int,
    ffn_mult: int = 4,
) -> list[dict]:
    """Divided space-time transformer: temporal attn, spatial attn, FFN."""
    all_tokens = frames * patches + 1
    arch: list[dict] = []
    for _ in range(layers):
        arch.append(
            {
                "kind": "attention",
                "hidden": hidden,
                "tokens": frames,
                "heads": heads,
                "groups": patches,
                "include_ffn": False,
            }
        )
        arch.append(
            {
                "kind": "attention",
                "hidden": hidden,
                "tokens": patches + 1,
                "heads": heads,
                "groups": frames,
                "include_ffn": False,
            }
        )
        arch.append({"kind": "norm", "tokens": all_tokens, "dim": hidden})
        arch.append(
            {
                "kind": "mlp",
                "widths": [hidden, ffn_mult * hidden, hidden],
                "tokens": all_tokens,
            }
        )
    arch.append({"kind": "norm", "tokens": all_tokens, "dim": hidden})
    return arch


def student_arch(
    width: int = 768,
    layers: int = 4,
    heads: int = 12,
    gaze_frames: int = 16,
    feature_dim: int = 17,
    k_classes: int = 4,
    n_subtasks: int = 9,
) -> list[dict]:
    """Gaze-only student: input projection, 4x768 encoder over 19 tokens."""
    tokens = gaze_frames + 3  # class + distillation + action tokens
    arch = [
        {"kind": "linear", "d_in": feature_dim, "d_out": width, "tokens": gaze_frames}
    ]
    arch += transformer_arch(layers, width, tokens, heads)
    arch.append({"kind": "linear", "d_in": width, "d_out": k_classes})
    arch.append({"kind": "linear", "d_in": width, "d_out": n_subtasks})
    return arch


def timesformer_arch(
    frames: int = 16,
    image_px: int = 224,
    patch_px: int = 16,
    hidden: int = 768,
    layers: int = 12,
    heads: int = 12,
    views: int = 3,
) -> list[dict]:
    """TimeSformer-scale video baseline workload.

    Defaults follow the published 16-frame, 224 px configuration evaluated
    with the standard 3-crop protocol (all crops processed per inference).
    """
    side = image_px // patch_px
    patches = side * side
    per_view = [
        {
            "kind": "conv2d",
            "c_in": 3,
            "c_out": hidden,
            "kernel": patch_px,
            "in_h": image_px,
            "in_w": image_px,
            "out_h": side,
            "out_w": side,
            "groups": frames,
        }
    ]
    per_view += divided_st_arch(layers, hidden, frames, patches, heads)
    return per_view * views


def read_arch_file(path: str | Path) -> list[dict]:
    """Load an architecture description (JSON list of layer dicts)."""
    with open(path) as f:
        arch = json.load(f)
    if not isinstance(arch, list):
        raise ConfigError("architecture file must contain a JSON list of layers")
    for layer in arch:
        if not isinstance(layer, dict) or layer.get("kind") not in LAYER_KINDS:
            raise ConfigError(
                f"unsupported layer kind '{layer.get('kind') if isinstance(layer, dict) else layer}'"
            )
    return arch


# ---------------------------------------------------------------------------
# reporting


def power_report(
    models: list[tuple[str, PowerProfile, float | None]],
    consts: PowerConstants | None = None,
) -> dict:
    """Power/accuracy table plus pairwise power ratios."""
    if not models:
        raise ConfigError("power report needs at least one model")
    consts = consts or PowerConstants()
    rows = []
    for name, profile, acc in models:
        b = power_mw(profile, consts)
        rows.append(
            {
                "name": name,
                "power_mw": b.total_mw,
                "compute_mw": b.compute_mw,
                "memory_mw": b.memory_mw,
                "sensor_mw": b.sensor_mw,
                "accuracy": acc,
                "macs": profile.macs_n,
                "bytes": profile.bytes_b,
                "interval_s": profile.interval_t_s,
            }
        )
    ratios = {}
    for a in rows:
        for b_ in rows:
            if a["name"] != b_["name"]:
                ratios[f"{a['name']}/{b_['name']}"] = a["power_mw"] / b_["power_mw"]
    return {"rows": rows, "ratios": ratios}


def write_power_report(report: dict, out_json: str | Path, out_csv: str | Path | None = None) -> None:
    with open(out_json, "w") as f:
        json.dump(report, f, indent=1)
        f.write("\n")
    if out_csv is not None:
        with open(out_csv, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(report["rows"][0].keys()))
            writer.writeheader()
            writer.writerows(report["rows"])
