import json

import numpy as np
import pytest

from skillsight.errors import EmptyInputError, FormatError
from skillsight.gaze_core import (
    ArrayFrameSource,
    Recording,
    load_dataset,
    load_recording,
    save_recording,
)
from skillsight.synthdata import SynthTaskSpec, generate_dataset

from conftest import make_sequence


def make_recording(rng, with_frames=True, n=64, rate_hz=30.0) -> Recording:
    gaze = make_sequence(rng, n=n, rate_hz=rate_hz)
    frames = None
    if with_frames:
        span = gaze.span_s
        times = np.linspace(0.0, span, 8)
        imgs = rng.integers(0, 255, size=(8, 16, 16, 3), dtype=np.uint8)
        frames = ArrayFrameSource(times, imgs)
    return Recording(
        id="rec-0",
        frames=frames,
        gaze=gaze,
        scenario="drill",
        subtask="scan",
        skill=1,
        split="train",
        k_classes=2,
        frame_rate_hz=8 / gaze.span_s if with_frames else None,
    )


def test_round_trip_bit_identical(rng, tmp_path):
    rec = make_recording(rng)
    save_recording(rec, tmp_path / "rec")
    back = load_recording(tmp_path / "rec")

    assert back.id == rec.id
    assert back.skill == rec.skill and back.k_classes == rec.k_classes
    assert back.scenario == rec.scenario and back.subtask == rec.subtask
    assert len(back.gaze) == len(rec.gaze)
    for a, b in zip(rec.gaze.samples, back.gaze.samples):
        assert a.time_s == b.time_s
        assert np.array_equal(a.fix3d, b.fix3d)
        assert np.array_equal(a.dir3d, b.dir3d)
        assert np.array_equal(a.g2d, b.g2d)
        assert a.depth_m == b.depth_m
        assert np.array_equal(a.rot, b.rot)
        assert np.array_equal(a.trans, b.trans)
        assert a.valid == b.valid
    assert np.array_equal(back.frames.times, rec.frames.times)
    for i in range(len(rec.frames)):
        assert np.array_equal(back.frames.get(i), rec.frames.get(i))


def test_round_trip_gaze_only(rng, tmp_path):
    rec = make_recording(rng, with_frames=False)
    save_recording(rec, tmp_path / "rec")
    back = load_recording(tmp_path / "rec")
    assert back.frames is None
    assert len(back.gaze) == len(rec.gaze)


def test_invalid_rows_kept_in_place(rng, tmp_path):
    rec = make_recording(rng)
    rec.gaze.samples[5].valid = False
    save_recording(rec, tmp_path / "rec")
    back = load_recording(tmp_path / "rec")
    assert not back.gaze.samples[5].valid
    assert len(back.gaze) == len(rec.gaze)


def test_non_unit_dir3d_rejected(rng, tmp_path):
    rec = make_recording(rng, with_frames=False)
    save_recording(rec, tmp_path / "rec")
    lines = (tmp_path / "rec" / "gaze.jsonl").read_text().splitlines()
    row = json.loads(lines[3])
    row["dir3d"] = [0.5, 0.0, 0.0]
    lines[3] = json.dumps(row)
    (tmp_path / "rec" / "gaze.jsonl").write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="dir3d not unit"):
        load_recording(tmp_path / "rec")


def test_missing_meta_field_named(rng, tmp_path):
    rec = make_recording(rng, with_frames=False)
    save_recording(rec, tmp_path / "rec")
    meta = json.loads((tmp_path / "rec" / "meta.json").read_text())
    del meta["skill"]
    (tmp_path / "rec" / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(FormatError, match="skill"):
        load_recording(tmp_path / "rec")


def test_empty_gaze_is_empty_input_error(rng, tmp_path):
    rec = make_recording(rng, with_frames=False)
    save_recording(rec, tmp_path / "rec")
    (tmp_path / "rec" / "gaze.jsonl").write_text("")
    with pytest.raises(EmptyInputError):
        load_recording(tmp_path / "rec")


def test_skill_out_of_range_rejected(rng, tmp_path):
    rec = make_recording(rng, with_frames=False)
    save_recording(rec, tmp_path / "rec")
    meta = json.loads((tmp_path / "rec" / "meta.json").read_text())
    meta["skill"] = 7
    (tmp_path / "rec" / "meta.json").write_text(json.dumps(meta))
    with pytest.raises(FormatError, match="skill"):
        load_recording(tmp_path / "rec")


def test_synthetic_dataset_loads_with_generator_labels(tmp_path):
    spec = SynthTaskSpec(kind="gaze-separable", n_recordings=2, seed=9, duration_s=10.0)
    manifest = generate_dataset(spec, tmp_path / "ds")
    recs = load_dataset(tmp_path / "ds")
    assert len(recs) == len(manifest["recordings"])
    by_id = {e["id"]: e for e in manifest["recordings"]}
    for rec in recs:
        entry = by_id[rec.id]
        assert rec.skill == entry["skill"]
        assert rec.subtask == entry["subtask"]
        assert rec.split == entry["split"]
        assert rec.scenario == manifest["scenario"]
