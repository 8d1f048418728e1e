import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from skillsight.errors import EmptyInputError, InvalidAnchorError
from skillsight.gaze_core import (
    FEATURE_DIM,
    FEATURE_SLICES,
    GazeSample,
    GazeSequence,
    clip_feature_rows,
    normalize_gaze,
)

from conftest import make_sequence, yaw_and_translate


def reference_normalize(seq: GazeSequence) -> np.ndarray:
    """Independent step-by-step transcription of the six rules (scipy-based)."""
    # hold-last-valid imputation
    held = []
    last = seq.samples[0]
    for s in seq.samples:
        if s.valid:
            last = s
        held.append(last)
    n = len(held)

    def rot_z(angle):
        c, s = np.cos(angle), np.sin(angle)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    # (a) fixation points
    fix = np.stack([h.fix3d for h in held])
    fix = fix - fix.mean(axis=0)
    theta = -np.arctan2(fix[0, 1], fix[0, 0]) if np.hypot(fix[0, 0], fix[0, 1]) > 1e-9 else 0.0
    fix = (rot_z(theta) @ fix.T).T

    # (b) direction, (c) 2D projection, (d) depth
    dirs = np.stack([h.dir3d for h in held])
    g2d = np.clip(np.stack([h.g2d for h in held]), 0.0, 1.0)
    depth = np.array([h.depth_m for h in held])

    # (e) rotation relative to frame 0 (scipy quats are xyzw)
    def to_scipy(q):
        return Rotation.from_quat([q[1], q[2], q[3], q[0]])

    r0 = to_scipy(held[0].rot)
    rels = []
    for h in held:
        rq = (r0.inv() * to_scipy(h.rot)).as_quat()  # xyzw
        q = np.array([rq[3], rq[0], rq[1], rq[2]])
        if q[0] < 0:
            q = -q
        rels.append(q)
    rels[0] = np.array([1.0, 0.0, 0.0, 0.0])
    rels = np.stack(rels)

    # (f) translation
    trans = np.stack([h.trans for h in held])
    trans = trans - trans.mean(axis=0)
    phi = 0.0
    for k in range(n - 1):
        d = trans[k + 1] - trans[k]
        if np.hypot(d[0], d[1]) > 1e-9:
            phi = -np.arctan2(d[1], d[0])
            break
    trans = (rot_z(phi) @ trans.T).T

    valid = np.array([float(s.valid) for s in seq.samples])
    return np.concatenate(
        [fix, dirs, g2d, depth[:, None], rels, trans, valid[:, None]], axis=1
    )


def test_matches_stepwise_reference(rng):
    seq = make_sequence(rng, n=32)
    ours = normalize_gaze(seq).features
    ref = reference_normalize(seq)
    assert ours.shape == (32, FEATURE_DIM)
    np.testing.assert_allclose(ours, ref, atol=1e-9)


def test_matches_reference_with_invalid_samples(rng):
    seq = make_sequence(rng, n=40, all_valid=False)
    np.testing.assert_allclose(
        normalize_gaze(seq).features, reference_normalize(seq), atol=1e-9
    )


def test_constant_straight_ahead_sequence():
    samples = [
        GazeSample(
            time_s=i / 10.0,
            fix3d=np.array([2.0, 0.0, 1.6]),
            dir3d=np.array([1.0, 0.0, 0.0]),
            g2d=np.array([0.5, 0.5]),
            depth_m=2.0,
            rot=np.array([1.0, 0.0, 0.0, 0.0]),
            trans=np.array([0.0, 0.0, 1.6]),
            valid=True,
        )
        for i in range(16)
    ]
    out = normalize_gaze(GazeSequence(samples, rate_hz=10.0))
    np.testing.assert_allclose(out.field("fix3d"), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.field("trans"), 0.0, atol=1e-12)
    expected_rot = np.tile([1.0, 0.0, 0.0, 0.0], (16, 1))
    np.testing.assert_allclose(out.field("rel_rot"), expected_rot, atol=1e-12)


def test_invariance_to_90deg_yaw_and_translation(rng):
    seq = make_sequence(rng, n=24)
    moved = yaw_and_translate(seq, np.pi / 2, [5.0, 0.0, 2.0])
    np.testing.assert_allclose(
        normalize_gaze(seq).features, normalize_gaze(moved).features, atol=1e-6
    )


@settings(max_examples=25, deadline=None)
@given(
    angle=st.floats(-np.pi, np.pi, allow_nan=False),
    tx=st.floats(-10, 10),
    ty=st.floats(-10, 10),
    seed=st.integers(0, 2**16),
)
def test_invariance_property(angle, tx, ty, seed):
    seq = make_sequence(np.random.default_rng(seed), n=12)
    moved = yaw_and_translate(seq, angle, [tx, ty, 0.7])
    np.testing.assert_allclose(
        normalize_gaze(seq).features, normalize_gaze(moved).features, atol=1e-6
    )


def test_frame0_postconditions_exact(rng):
    for _ in range(20):
        out = normalize_gaze(make_sequence(rng, n=10)).features
        assert out[0, FEATURE_SLICES["fix3d"]][1] == 0.0
        np.testing.assert_array_equal(
            out[0, FEATURE_SLICES["rel_rot"]], [1.0, 0.0, 0.0, 0.0]
        )


def test_idempotent_on_canonical_sequence(rng):
    seq = make_sequence(rng, n=16)
    first = normalize_gaze(seq).features
    rebuilt = [
        GazeSample(
            time_s=s.time_s,
            fix3d=first[i, FEATURE_SLICES["fix3d"]],
            dir3d=first[i, FEATURE_SLICES["dir3d"]],
            g2d=first[i, FEATURE_SLICES["g2d"]],
            depth_m=float(first[i, FEATURE_SLICES["depth"]][0]),
            rot=first[i, FEATURE_SLICES["rel_rot"]],
            trans=first[i, FEATURE_SLICES["trans"]],
            valid=True,
        )
        for i, s in enumerate(seq.samples)
    ]
    second = normalize_gaze(GazeSequence(rebuilt, rate_hz=seq.rate_hz)).features
    np.testing.assert_allclose(second, first, atol=1e-9)


def test_first_sample_invalid_reports_anchor(rng):
    seq = make_sequence(rng, n=8)
    seq.samples[0].valid = False
    seq.samples[1].valid = False
    with pytest.raises(InvalidAnchorError) as err:
        normalize_gaze(seq)
    assert err.value.first_valid_index == 2
    assert "2" in str(err.value)


def test_all_invalid_raises(rng):
    seq = make_sequence(rng, n=4)
    for s in seq.samples:
        s.valid = False
    with pytest.raises(EmptyInputError):
        normalize_gaze(seq)


def test_clip_feature_rows_reanchors(rng):
    seq = make_sequence(rng, n=16)
    seq.samples[0].valid = False
    seq.samples[1].valid = False
    rows = clip_feature_rows(seq.samples)
    assert rows.shape == (16, FEATURE_DIM)
    np.testing.assert_array_equal(
        rows[:, FEATURE_SLICES["valid"]].ravel()[:3], [0.0, 0.0, 1.0]
    )
    assert np.all(np.isfinite(rows))


def test_clip_feature_rows_all_invalid(rng):
    seq = make_sequence(rng, n=4)
    for s in seq.samples:
        s.valid = False
    rows = clip_feature_rows(seq.samples)
    np.testing.assert_array_equal(rows, np.zeros((4, FEATURE_DIM)))
