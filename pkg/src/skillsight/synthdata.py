"""Deterministic synthetic recordings with class-distinct gaze behavior.

Each recording simulates a wearer alternating fixations and saccades over a
small scene of colored blobs. Class profiles control fixation durations,
region dwell fractions, gaze depth, and head motion; blob colors optionally
encode the class so that visual and gaze information can be decoupled:

- ``gaze-separable``: classes differ strongly in gaze statistics, blob
  colors carry no label information (sanity task for gaze-only models);
- ``visually-separable``: identical gaze profiles, the central blob's color
  encodes the class (sanity task for the video teacher);
- ``distillation``: the blob color encodes the class exactly while gaze
  statistics correlate with it only noisily, so a video teacher beats any
  gaze-only model and distillation has headroom to close the gap.

Determinism: every recording derives its RNG from (seed, recording index)
via a counter-style SeedSequence, so regeneration and parallel generation
produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .gaze_core import (
    ArrayFrameSource,
    GazeSample,
    GazeSequence,
    Recording,
    save_recording,
)
from .gaze_core.quat import from_axis_angle, mul as quat_mul, rotate_vec

TASK_KINDS = ("gaze-separable", "visually-separable", "distillation")

SCENE_ROIS = {
    "target": (0.50, 0.32),
    "tool": (0.20, 0.70),
    "guide": (0.80, 0.66),
    "floor": (0.50, 0.92),
}
SUBTASK_NAMES = ("scan", "track", "inspect")
_SUBTASK_ROI = {"scan": "tool", "track": "guide", "inspect": "floor"}

CLASS_COLORS = ((205, 60, 50), (60, 190, 80), (70, 110, 220), (220, 200, 60))
NEUTRAL_COLOR = (150, 140, 120)
DISTRACTOR_PALETTE = ((110, 100, 95), (95, 105, 115), (125, 115, 90), (100, 120, 100))
BACKGROUND = (18, 18, 22)

FOV_DEG = 80.0  # full field of view mapped onto the [0,1] image span


@dataclass
class ClassProfile:
    """Generative gaze-behavior parameters for one skill class."""

    fix_dur_mean_s: float = 0.4
    fix_dur_std_s: float = 0.1
    saccade_dur_s: float = 0.06
    roi_dwell: dict[str, float] = field(
        default_factory=lambda: {"target": 0.4, "tool": 0.2, "guide": 0.2, "floor": 0.2}
    )
    roi_spread: float = 1.0  # scales the ROI layout about the frame center
    depth_mean_m: float = 1.2
    depth_std_m: float = 0.2
    depth_rec_std_m: float = 0.0  # per-recording depth-mean jitter
    fixdur_rec_std_s: float = 0.0  # per-recording duration-mean jitter
    dwell_jitter: float = 0.0  # Dirichlet concentration; 0 disables
    subtask_dwell_shift: float = 0.0  # dwell mass moved toward the subtask ROI
    head_motion_amp_m: float = 0.05
    g2d_noise: float = 0.01
    dir_noise_deg: float = 0.3
    invalid_rate: float = 0.0

    def __post_init__(self):
        for name, value in (
            ("fix_dur_std_s", self.fix_dur_std_s),
            ("depth_std_m", self.depth_std_m),
            ("depth_rec_std_m", self.depth_rec_std_m),
            ("fixdur_rec_std_s", self.fixdur_rec_std_s),
        ):
            if value < 0:
                raise ConfigError(f"{name} must be >= 0")
        total = sum(self.roi_dwell.values())
        if abs(total - 1.0) > 1e-6:
            raise ConfigError(f"roi_dwell must sum to 1, got {total}")
        for roi in self.roi_dwell:
            if roi not in SCENE_ROIS:
                raise ConfigError(f"unknown ROI '{roi}' in roi_dwell")


@dataclass
class SynthTaskSpec:
    kind: str = "distillation"
    n_recordings: int = 50  # per class
    k_classes: int = 2
    n_subtasks: int = 3
    seed: int = 0
    duration_s: float = 40.0
    gaze_rate_hz: float = 30.0
    frame_rate_hz: float = 2.0
    image_px: int = 64
    with_frames: bool = True
    split_fractions: tuple[float, float] = (0.7, 0.85)  # train/val cut points

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"task kind must be one of {TASK_KINDS}")
        if self.n_recordings < 1:
            raise ConfigError("n_recordings must be >= 1")
        if not 1 <= self.n_subtasks <= len(SUBTASK_NAMES):
            raise ConfigError(f"n_subtasks must be in [1, {len(SUBTASK_NAMES)}]")
        if self.k_classes > len(CLASS_COLORS):
            raise ConfigError(f"at most {len(CLASS_COLORS)} classes supported")
        a, b = self.split_fractions
        if not 0 < a <= b <= 1:
            raise ConfigError("split_fractions must satisfy 0 < train <= val <= 1")


def default_profiles(kind: str, k_classes: int = 2) -> list[ClassProfile]:
    """Per-class generative profiles for each task preset."""
    if kind == "gaze-separable":
        deliberate = ClassProfile(
            fix_dur_mean_s=0.55,
            fix_dur_std_s=0.10,
            roi_dwell={"target": 0.55, "tool": 0.20, "guide": 0.20, "floor": 0.05},
            roi_spread=1.0,
            depth_mean_m=1.5,
            depth_std_m=0.2,
        )
        restless = ClassProfile(
            fix_dur_mean_s=0.18,
            fix_dur_std_s=0.05,
            roi_dwell={"target": 0.25, "tool": 0.30, "guide": 0.25, "floor": 0.20},
            roi_spread=0.6,
            depth_mean_m=0.9,
            depth_std_m=0.2,
        )
        base = [deliberate, restless]
    elif kind == "visually-separable":
        base = [
            ClassProfile(
                fix_dur_mean_s=0.40,
                fix_dur_std_s=0.10,
                roi_dwell={"target": 0.40, "tool": 0.22, "guide": 0.22, "floor": 0.16},
                depth_mean_m=1.2,
                depth_std_m=0.25,
            )
            for _ in range(k_classes)
        ]
    else:  # distillation
        expert = ClassProfile(
            fix_dur_mean_s=0.45,
            fix_dur_std_s=0.12,
            fixdur_rec_std_s=0.08,
            roi_dwell={"target": 0.58, "tool": 0.16, "guide": 0.16, "floor": 0.10},
            depth_mean_m=1.4,
            depth_std_m=0.35,
            depth_rec_std_m=0.20,
            dwell_jitter=25.0,
            subtask_dwell_shift=0.15,
        )
        novice = ClassProfile(
            fix_dur_mean_s=0.30,
            fix_dur_std_s=0.10,
            fixdur_rec_std_s=0.08,
            roi_dwell={"target": 0.34, "tool": 0.22, "guide": 0.22, "floor": 0.22},
            depth_mean_m=1.1,
            depth_std_m=0.35,
            depth_rec_std_m=0.20,
            dwell_jitter=25.0,
            subtask_dwell_shift=0.15,
        )
        base = [expert, novice]
    while len(base) < k_classes:
        base.append(base[len(base) % 2])
    return base[:k_classes]


def _dir_from_azel(az_rad, el_rad):
    """Unit direction in the wearer frame (+x forward, +y left, +z up)."""
    az = np.asarray(az_rad, dtype=float)
    el = np.asarray(el_rad, dtype=float)
    return np.stack(
        [np.cos(el) * np.cos(az), -np.cos(el) * np.sin(az), np.sin(el)], axis=-1
    )


def _azel_from_g2d(g2d):
    fov = np.deg2rad(FOV_DEG)
    u, v = g2d[..., 0], g2d[..., 1]
    return (u - 0.5) * fov, (0.5 - v) * fov


def _g2d_from_azel(az_rad, el_rad):
    fov = np.deg2rad(FOV_DEG)
    return np.stack([az_rad / fov + 0.5, 0.5 - el_rad / fov], axis=-1)


def _head_quat(yaw, pitch, roll):
    return quat_mul(
        from_axis_angle([0.0, 0.0, 1.0], yaw),
        quat_mul(
            from_axis_angle([0.0, 1.0, 0.0], pitch),
            from_axis_angle([1.0, 0.0, 0.0], roll),
        ),
    )


@dataclass
class _Fixation:
    start_s: float
    end_s: float
    g2d: np.ndarray
    depth_m: float


def _sample_fixation_schedule(profile, dwell, blob_g2d, duration_s, rng):
    """Alternating fixation/saccade plan over the recording duration."""
    rois = list(dwell.keys())
    probs = np.array([dwell[r] for r in rois])
    probs = probs / probs.sum()
    dur_mean = max(
        0.08, profile.fix_dur_mean_s + rng.normal(0.0, profile.fixdur_rec_std_s)
    )
    events = []
    t = 0.0
    while t < duration_s:
        roi = rois[rng.choice(len(rois), p=probs)]
        dur = float(np.clip(rng.normal(dur_mean, profile.fix_dur_std_s), 0.08, 3.0))
        g = np.clip(blob_g2d[roi] + rng.normal(0.0, 0.02, size=2), 0.0, 1.0)
        depth = float(
            np.clip(rng.normal(profile.depth_mean_m, profile.depth_std_m), 0.2, None)
        )
        events.append(_Fixation(t, min(t + dur, duration_s), g, depth))
        t += dur + profile.saccade_dur_s
    return events


def _trace_from_fixations(events, duration_s, rate_hz, profile, rng):
    """Sample gaze rows from a fixation plan, interpolating the saccades."""
    n = int(round(duration_s * rate_hz)) + 1
    times = np.arange(n) / rate_hz
    g2d = np.zeros((n, 2))
    depth = np.zeros(n)
    starts = np.array([e.start_s for e in events])
    for i, t in enumerate(times):
        k = int(np.searchsorted(starts, t, side="right")) - 1
        k = max(k, 0)
        e = events[k]
        if t <= e.end_s or k + 1 >= len(events):
            g2d[i] = e.g2d
            depth[i] = e.depth_m
        else:
            nxt = events[k + 1]
            w = (t - e.end_s) / max(nxt.start_s - e.end_s, 1e-9)
            g2d[i] = (1 - w) * e.g2d + w * nxt.g2d
            depth[i] = (1 - w) * e.depth_m + w * nxt.depth_m
    g2d = np.clip(g2d + rng.normal(0.0, profile.g2d_noise, size=g2d.shape), 0.0, 1.0)
    az, el = _azel_from_g2d(g2d)
    noise = np.deg2rad(profile.dir_noise_deg)
    az = az + rng.normal(0.0, noise, size=n)
    el = el + rng.normal(0.0, noise, size=n)
    dir3d = _dir_from_azel(az, el)
    return times, g2d, dir3d, depth


def generate_recording(
    spec: SynthTaskSpec,
    profile: ClassProfile,
    skill: int,
    subtask: str,
    split: str,
    rec_index: int,
    rng: np.random.Generator,
) -> Recording:
    """One synthetic recording; frames and gaze share a consistent geometry."""
    # per-recording dwell distribution (optionally jittered + subtask-shifted)
    dwell = dict(profile.roi_dwell)
    if profile.subtask_dwell_shift > 0 and subtask in _SUBTASK_ROI:
        shift_roi = _SUBTASK_ROI[subtask]
        scale = 1.0 - profile.subtask_dwell_shift
        dwell = {k: v * scale for k, v in dwell.items()}
        dwell[shift_roi] += profile.subtask_dwell_shift
    if profile.dwell_jitter > 0:
        names = list(dwell.keys())
        alpha = np.array([dwell[k] for k in names]) * profile.dwell_jitter
        sampled = rng.dirichlet(alpha)
        dwell = dict(zip(names, sampled))

    # blob layout: anchors scaled about the center, with a small jitter
    blob_g2d = {}
    for name, (u, v) in SCENE_ROIS.items():
        uv = 0.5 + (np.array([u, v]) - 0.5) * profile.roi_spread
        blob_g2d[name] = np.clip(uv + rng.normal(0.0, 0.015, size=2), 0.08, 0.92)

    events = _sample_fixation_schedule(profile, dwell, blob_g2d, spec.duration_s, rng)
    times, g2d, dir3d, depth = _trace_from_fixations(
        events, spec.duration_s, spec.gaze_rate_hz, profile, rng
    )
    n = len(times)

    # slow sinusoidal head motion
    base = rng.uniform(-2.0, 2.0, size=3)
    base[2] = rng.uniform(1.5, 1.8)  # head height above the floor (z-up)
    freqs = rng.uniform(0.08, 0.25, size=3)
    phases = rng.uniform(0.0, 2 * np.pi, size=3)
    amp = profile.head_motion_amp_m
    trans = base + amp * np.sin(
        2 * np.pi * freqs[None, :] * times[:, None] + phases[None, :]
    )
    yaw0 = rng.uniform(-np.pi, np.pi)
    yaw = yaw0 + 0.12 * np.sin(2 * np.pi * 0.1 * times + phases[0])
    pitch = 0.08 * np.sin(2 * np.pi * 0.13 * times + phases[1])
    roll = 0.04 * np.sin(2 * np.pi * 0.17 * times + phases[2])
    rot = np.stack([_head_quat(y, p, r) for y, p, r in zip(yaw, pitch, roll)])

    fix3d = trans + rotate_vec(rot, dir3d) * depth[:, None]

    invalid = rng.random(n) < profile.invalid_rate
    invalid[0] = False
    samples = [
        GazeSample(
            time_s=float(times[i]),
            fix3d=fix3d[i],
            dir3d=dir3d[i],
            g2d=g2d[i],
            depth_m=float(depth[i]),
            rot=rot[i],
            trans=trans[i],
            valid=not bool(invalid[i]),
        )
        for i in range(n)
    ]

    frames = None
    if spec.with_frames:
        target_color = (
            CLASS_COLORS[skill] if spec.kind != "gaze-separable" else NEUTRAL_COLOR
        )
        colors = {"target": target_color}
        for name in SCENE_ROIS:
            if name != "target":
                colors[name] = DISTRACTOR_PALETTE[
                    rng.integers(len(DISTRACTOR_PALETTE))
                ]
        img = _draw_scene(spec.image_px, blob_g2d, colors)
        n_frames = int(round(spec.duration_s * spec.frame_rate_hz)) + 1
        frame_times = np.arange(n_frames) / spec.frame_rate_hz
        frames = ArrayFrameSource(
            frame_times, np.repeat(img[None], n_frames, axis=0)
        )

    return Recording(
        id=f"{spec.kind.split('-')[0]}-c{skill}-{rec_index:03d}",
        frames=frames,
        gaze=GazeSequence(samples, rate_hz=spec.gaze_rate_hz),
        scenario=f"synth-{spec.kind}",
        subtask=subtask,
        skill=skill,
        split=split,
        k_classes=spec.k_classes,
        up_axis="z",
        frame_rate_hz=spec.frame_rate_hz if spec.with_frames else None,
    )


def _draw_scene(px: int, blob_g2d: dict, colors: dict) -> np.ndarray:
    img = np.empty((px, px, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    yy, xx = np.mgrid[0:px, 0:px]
    radius = max(3, px // 12)
    for name, uv in blob_g2d.items():
        cx, cy = uv[0] * px, uv[1] * px
        mask = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius**2
        img[mask] = colors[name]
    return img


def _split_for_index(i: int, n: int, fractions=(0.7, 0.85)) -> str:
    if i < int(fractions[0] * n):
        return "train"
    if i < int(fractions[1] * n):
        return "val"
    return "test"


def generate_dataset(
    spec: SynthTaskSpec,
    out_dir: str | Path,
    profiles: list[ClassProfile] | None = None,
) -> dict:
    """Write a labeled dataset in the recording-directory format.

    Returns a manifest dict (also written as ``manifest.json``).
    """
    profiles = profiles or default_profiles(spec.kind, spec.k_classes)
    if len(profiles) < spec.k_classes:
        raise ConfigError("profiles must cover all classes")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for skill in range(spec.k_classes):
        for i in range(spec.n_recordings):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=spec.seed, spawn_key=(skill, i))
            )
            subtask = SUBTASK_NAMES[i % spec.n_subtasks]
            split = _split_for_index(i, spec.n_recordings, spec.split_fractions)
            rec = generate_recording(spec, profiles[skill], skill, subtask, split, i, rng)
            save_recording(rec, out_dir / rec.id)
            entries.append(
                {"id": rec.id, "skill": skill, "subtask": subtask, "split": split}
            )

    manifest = {
        "task": spec.kind,
        "seed": spec.seed,
        "k_classes": spec.k_classes,
        "n_per_class": spec.n_recordings,
        "scenario": f"synth-{spec.kind}",
        "recordings": entries,
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=1)
        f.write("\n")
    return manifest


# ---------------------------------------------------------------------------
# scripted traces (oracle inputs for event-detection tests)


@dataclass
class ScriptedFixation:
    start_s: float
    end_s: float
    az_deg: float
    el_deg: float = 0.0
    depth_m: float = 1.0


def planted_event_trace(
    events: list[ScriptedFixation],
    rate_hz: float = 60.0,
    noise_deg: float = 0.0,
    seed: int = 0,
    duration_s: float | None = None,
) -> GazeSequence:
    """Exact piecewise gaze trace realizing a fixation script.

    During a scripted fixation the gaze direction is constant; between
    fixations it interpolates linearly in azimuth/elevation. An empty script
    yields a constant straight-ahead trace. Gaussian angular noise of
    ``noise_deg`` is added when requested.
    """
    for a, b in zip(events, events[1:]):
        if b.start_s < a.end_s:
            raise ConfigError(
                f"scripted events overlap: [{a.start_s}, {a.end_s}] then "
                f"[{b.start_s}, {b.end_s}]"
            )
    for e in events:
        if e.end_s <= e.start_s:
            raise ConfigError(f"scripted event has non-positive duration: {e}")

    if duration_s is None:
        duration_s = events[-1].end_s if events else 1.0
    n = int(round(duration_s * rate_hz)) + 1
    times = np.arange(n) / rate_hz

    az = np.zeros(n)
    el = np.zeros(n)
    depth = np.ones(n)
    if events:
        starts = np.array([e.start_s for e in events])
        for i, t in enumerate(times):
            k = int(np.searchsorted(starts, t, side="right")) - 1
            if k < 0:
                e = events[0]
                az[i], el[i], depth[i] = e.az_deg, e.el_deg, e.depth_m
                continue
            e = events[k]
            if t <= e.end_s or k + 1 >= len(events):
                az[i], el[i], depth[i] = e.az_deg, e.el_deg, e.depth_m
            else:
                nxt = events[k + 1]
                w = (t - e.end_s) / max(nxt.start_s - e.end_s, 1e-9)
                az[i] = (1 - w) * e.az_deg + w * nxt.az_deg
                el[i] = (1 - w) * e.el_deg + w * nxt.el_deg
                depth[i] = (1 - w) * e.depth_m + w * nxt.depth_m

    if noise_deg > 0:
        rng = np.random.default_rng(seed)
        az = az + rng.normal(0.0, noise_deg, size=n)
        el = el + rng.normal(0.0, noise_deg, size=n)

    az_rad, el_rad = np.deg2rad(az), np.deg2rad(el)
    dir3d = _dir_from_azel(az_rad, el_rad)
    g2d = np.clip(_g2d_from_azel(az_rad, el_rad), 0.0, 1.0)
    samples = [
        GazeSample(
            time_s=float(times[i]),
            fix3d=dir3d[i] * depth[i],
            dir3d=dir3d[i],
            g2d=g2d[i],
            depth_m=float(depth[i]),
            rot=np.array([1.0, 0.0, 0.0, 0.0]),
            trans=np.zeros(3),
            valid=True,
        )
        for i in range(n)
    ]
    return GazeSequence(samples, rate_hz=rate_hz)
