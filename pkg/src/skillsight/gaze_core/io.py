"""On-disk recording format.

A recording directory contains:

- ``meta.json``: ``{id, scenario, subtask, skill, split, k_classes,
  up_axis, frame_rate_hz}``
- ``gaze.jsonl``: one JSON object per sample:
  ``{t, fix3d:[x,y,z], dir3d:[x,y,z], g2d:[u,v], depth, quat:[w,x,y,z],
  trans:[x,y,z], valid}``
- ``frames/`` (optional): ``frame_%06d.png`` plus ``index.json`` mapping
  frame index (as a string) to its timestamp in seconds.

Floats round-trip exactly: Python's json module serializes via repr, which
is lossless for doubles.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import EmptyInputError, FormatError
from .types import (
    ArrayFrameSource,
    FrameSource,
    GazeSample,
    GazeSequence,
    Recording,
)

META_FIELDS = (
    "id",
    "scenario",
    "subtask",
    "skill",
    "split",
    "k_classes",
    "up_axis",
    "frame_rate_hz",
)
GAZE_FIELDS = ("t", "fix3d", "dir3d", "g2d", "depth", "quat", "trans", "valid")


class DirectoryFrameSource(FrameSource):
    """Lazy PNG-backed frame source for a recording directory."""

    def __init__(self, frames_dir: Path):
        self.frames_dir = Path(frames_dir)
        index_path = self.frames_dir / "index.json"
        if not index_path.exists():
            raise FormatError(f"frames/index.json missing in {frames_dir}")
        with open(index_path) as f:
            index = json.load(f)
        try:
            pairs = sorted((int(k), float(v)) for k, v in index.items())
        except (TypeError, ValueError) as e:
            raise FormatError(f"frames/index.json: malformed entry ({e})") from e
        self._indices = [k for k, _ in pairs]
        self.times = np.array([t for _, t in pairs])
        if len(self.times) and np.any(np.diff(self.times) <= 0):
            raise FormatError("frames/index.json: timestamps must increase")

    def get(self, index: int) -> np.ndarray:
        path = self.frames_dir / f"frame_{self._indices[index]:06d}.png"
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))


def _parse_gaze_row(obj: dict, line_no: int) -> GazeSample:
    where = f"gaze.jsonl line {line_no}"
    for key in GAZE_FIELDS:
        if key not in obj:
            raise FormatError(f"{where}: missing field '{key}'")
    sample = GazeSample(
        time_s=float(obj["t"]),
        fix3d=np.array(obj["fix3d"], dtype=float),
        dir3d=np.array(obj["dir3d"], dtype=float),
        g2d=np.array(obj["g2d"], dtype=float),
        depth_m=float(obj["depth"]),
        rot=np.array(obj["quat"], dtype=float),
        trans=np.array(obj["trans"], dtype=float),
        valid=bool(obj["valid"]),
    )
    sample.validate(where)
    return sample


def load_recording(path: str | Path) -> Recording:
    """Load and validate one recording directory.

    Invalid gaze rows (``valid: false``) are kept in place so indices stay
    aligned with the raw stream; rows that violate the schema raise a
    FormatError naming the field.
    """
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise FormatError(f"meta.json missing in {path}")
    with open(meta_path) as f:
        meta = json.load(f)
    for key in META_FIELDS:
        if key not in meta:
            raise FormatError(f"meta.json: missing field '{key}'")

    gaze_path = path / "gaze.jsonl"
    if not gaze_path.exists():
        raise FormatError(f"gaze.jsonl missing in {path}")
    samples = []
    with open(gaze_path) as f:
        for line_no, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"gaze.jsonl line {line_no}: not JSON ({e})") from e
            samples.append(_parse_gaze_row(obj, line_no))
    if not samples:
        raise EmptyInputError(f"gaze.jsonl in {path} has no samples")

    frames_dir = path / "frames"
    frames = DirectoryFrameSource(frames_dir) if frames_dir.is_dir() else None

    rec = Recording(
        id=str(meta["id"]),
        frames=frames,
        gaze=GazeSequence(samples, rate_hz=float(meta.get("gaze_rate_hz", 0) or _infer_rate(samples))),
        scenario=str(meta["scenario"]),
        subtask=str(meta["subtask"]),
        skill=int(meta["skill"]),
        split=str(meta["split"]),
        k_classes=int(meta["k_classes"]),
        up_axis=str(meta["up_axis"]),
        frame_rate_hz=(float(meta["frame_rate_hz"]) if meta["frame_rate_hz"] else None),
    )
    rec.validate()
    return rec


def _infer_rate(samples: list[GazeSample]) -> float:
    if len(samples) < 2:
        return 0.0
    return (len(samples) - 1) / (samples[-1].time_s - samples[0].time_s)


def save_recording(rec: Recording, path: str | Path) -> Path:
    """Write a recording directory in the documented format."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "id": rec.id,
        "scenario": rec.scenario,
        "subtask": rec.subtask,
        "skill": rec.skill,
        "split": rec.split,
        "k_classes": rec.k_classes,
        "up_axis": rec.up_axis,
        "frame_rate_hz": rec.frame_rate_hz,
        "gaze_rate_hz": rec.gaze.rate_hz,
    }
    with open(path / "meta.json", "w") as f:
        json.dump(meta, f, indent=1)
        f.write("\n")

    with open(path / "gaze.jsonl", "w") as f:
        for s in rec.gaze.samples:
            row = {
                "t": s.time_s,
                "fix3d": list(s.fix3d),
                "dir3d": list(s.dir3d),
                "g2d": list(s.g2d),
                "depth": s.depth_m,
                "quat": list(s.rot),
                "trans": list(s.trans),
                "valid": bool(s.valid),
            }
            f.write(json.dumps(row) + "\n")

    if rec.frames is not None:
        frames_dir = path / "frames"
        frames_dir.mkdir(exist_ok=True)
        index = {}
        for i in range(len(rec.frames)):
            img = rec.frames.get(i)
            Image.fromarray(np.asarray(img, dtype=np.uint8)).save(
                frames_dir / f"frame_{i:06d}.png"
            )
            index[str(i)] = float(rec.frames.times[i])
        with open(frames_dir / "index.json", "w") as f:
            json.dump(index, f)
            f.write("\n")
    return path


def load_dataset(root: str | Path, split: str | None = None) -> list[Recording]:
    """Load every recording directory under ``root`` (sorted by name)."""
    root = Path(root)
    recs = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        if not (sub / "meta.json").exists():
            continue
        rec = load_recording(sub)
        if split is None or rec.split == split:
            recs.append(rec)
    if not recs:
        raise EmptyInputError(f"no recordings found under {root}")
    return recs


__all__ = [
    "ArrayFrameSource",
    "DirectoryFrameSource",
    "load_recording",
    "save_recording",
    "load_dataset",
]
