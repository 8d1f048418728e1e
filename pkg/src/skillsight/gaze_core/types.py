"""Data model for gaze recordings and clips.

World-frame convention used by the on-disk format: right-handed, +z is
gravity-up, x/y span the horizontal plane (``up_axis`` is declared in
``meta.json`` so converters from other conventions can adapt).
Wearer-centric frame for gaze direction: +x forward, +y left, +z up.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from ..errors import EmptyInputError, FormatError

UP_AXES = ("x", "y", "z")
DEFAULT_UP_AXIS = "z"
UNIT_TOL = 1e-6

SPLITS = ("train", "val", "test")


@dataclass
class GazeSample:
    """One eye-tracker sample with the accompanying glasses pose."""

    time_s: float  # seconds from recording start
    fix3d: np.ndarray  # (3,) fixation point, meters, world frame
    dir3d: np.ndarray  # (3,) unit gaze direction, wearer-centric frame
    g2d: np.ndarray  # (2,) gaze projected on the ego frame, [0,1]^2
    depth_m: float  # head-to-fixation distance, meters
    rot: np.ndarray  # (4,) unit quaternion (w,x,y,z), glasses orientation
    trans: np.ndarray  # (3,) glasses position, meters, world frame
    valid: bool = True  # eye tracker produced a sample

    def __post_init__(self):
        self.fix3d = np.asarray(self.fix3d, dtype=float)
        self.dir3d = np.asarray(self.dir3d, dtype=float)
        self.g2d = np.asarray(self.g2d, dtype=float)
        self.rot = np.asarray(self.rot, dtype=float)
        self.trans = np.asarray(self.trans, dtype=float)

    def validate(self, where: str = "sample") -> None:
        """Raise FormatError naming the offending field.

        Geometric invariants on fix3d/dir3d are only enforced for valid
        samples; invalid rows carry placeholder values but must still parse.
        """
        for name, vec, n in (
            ("fix3d", self.fix3d, 3),
            ("dir3d", self.dir3d, 3),
            ("g2d", self.g2d, 2),
            ("rot", self.rot, 4),
            ("trans", self.trans, 3),
        ):
            if vec.shape != (n,):
                raise FormatError(f"{where}: {name} must have {n} components")
        if not np.all(np.isfinite(self.g2d)):
            raise FormatError(f"{where}: g2d not finite")
        if abs(np.linalg.norm(self.rot) - 1.0) > UNIT_TOL:
            raise FormatError(f"{where}: rot not unit")
        if not np.isfinite(self.depth_m) or self.depth_m < 0:
            raise FormatError(f"{where}: depth must be >= 0")
        if self.valid:
            if not np.all(np.isfinite(self.fix3d)):
                raise FormatError(f"{where}: fix3d not finite")
            if abs(np.linalg.norm(self.dir3d) - 1.0) > UNIT_TOL:
                raise FormatError(f"{where}: dir3d not unit")


@dataclass(eq=False)
class GazeSequence:
    """Time-ordered gaze samples for one clip or recording."""

    samples: list[GazeSample]
    rate_hz: float

    def __post_init__(self):
        if not self.samples:
            raise EmptyInputError("gaze sequence is empty")
        t = np.array([s.time_s for s in self.samples])
        if np.any(np.diff(t) <= 0):
            raise FormatError("gaze timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.samples)

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([s.time_s for s in self.samples])

    @cached_property
    def fix3d(self) -> np.ndarray:
        return np.stack([s.fix3d for s in self.samples])

    @cached_property
    def dir3d(self) -> np.ndarray:
        return np.stack([s.dir3d for s in self.samples])

    @cached_property
    def g2d(self) -> np.ndarray:
        return np.stack([s.g2d for s in self.samples])

    @cached_property
    def depth_m(self) -> np.ndarray:
        return np.array([s.depth_m for s in self.samples])

    @cached_property
    def rot(self) -> np.ndarray:
        return np.stack([s.rot for s in self.samples])

    @cached_property
    def trans(self) -> np.ndarray:
        return np.stack([s.trans for s in self.samples])

    @cached_property
    def valid(self) -> np.ndarray:
        return np.array([s.valid for s in self.samples], dtype=bool)

    @property
    def span_s(self) -> float:
        return float(self.times[-1] - self.times[0])


class FrameSource:
    """Indexable frame store: timestamps plus H x W x 3 uint8 images."""

    times: np.ndarray  # (n_frames,) seconds, strictly increasing

    def get(self, index: int) -> np.ndarray:
        raise NotImplementedError

    def nearest_index(self, t: float) -> int:
        """Index of the frame whose timestamp is closest to t (ties -> earlier)."""
        times = self.times
        i = int(np.searchsorted(times, t))
        if i == 0:
            return 0
        if i >= len(times):
            return len(times) - 1
        return i - 1 if (t - times[i - 1]) <= (times[i] - t) else i

    def __len__(self) -> int:
        return len(self.times)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])


class ArrayFrameSource(FrameSource):
    """In-memory frame source (used by the synthetic generator)."""

    def __init__(self, times: Sequence[float], frames: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self.frames = np.asarray(frames)
        if len(self.times) != len(self.frames):
            raise FormatError("frames: index length does not match frame count")

    def get(self, index: int) -> np.ndarray:
        return self.frames[index]


@dataclass(eq=False)
class Recording:
    """A labeled session: frames (optional), gaze, and annotations."""

    id: str
    frames: FrameSource | None  # None for gaze-only datasets
    gaze: GazeSequence
    scenario: str  # activity domain (e.g. soccer, music)
    subtask: str  # fine action label (e.g. dribbling)
    skill: int  # class in [0, k_classes)
    split: str  # train | val | test
    k_classes: int
    up_axis: str = DEFAULT_UP_AXIS
    frame_rate_hz: float | None = None

    def validate(self) -> None:
        if self.up_axis not in UP_AXES:
            raise FormatError(f"meta.json: up_axis must be one of {UP_AXES}")
        if self.split not in SPLITS:
            raise FormatError(f"meta.json: split must be one of {SPLITS}")
        if not (0 <= self.skill < self.k_classes):
            raise FormatError(
                f"meta.json: skill {self.skill} outside [0, {self.k_classes})"
            )
        if self.frames is not None and len(self.frames) > 0:
            lo, hi = self.frames.span
            period = 0.0
            if self.frame_rate_hz:
                period = 1.0 / self.frame_rate_hz
            t = self.gaze.times
            if t[0] < lo - period or t[-1] > hi + period:
                raise FormatError(
                    "gaze.jsonl: gaze timestamps outside frame-source span"
                )

    @property
    def span_s(self) -> float:
        """Recording span, anchored on the gaze timeline.

        The gaze timeline is the one modality present in every recording,
        so clip grids derived from it are identical with and without the
        ``frames/`` directory (required for gaze-only inference isolation).
        """
        return self.gaze.span_s

    @property
    def start_s(self) -> float:
        return float(self.gaze.times[0])


@dataclass
class Clip:
    """A 16-frame window sampled at 2 frames/sec with aligned gaze."""

    recording_id: str
    frame_times: np.ndarray  # (16,) seconds
    frames: np.ndarray | None  # (16, H, W, 3) uint8, or None
    gaze: list[GazeSample] = field(repr=False)  # 16 samples, nearest-aligned
    padded: bool = False  # recording shorter than one clip

    def __post_init__(self):
        self.frame_times = np.asarray(self.frame_times, dtype=float)
        if len(self.frame_times) != len(self.gaze):
            raise FormatError("clip: frame_times and gaze lengths differ")
