import numpy as np
import pytest

from skillsight.gaze_core import (
    ArrayFrameSource,
    CLIP_LEN,
    CLIP_SPAN_S,
    GazeSample,
    GazeSequence,
    Recording,
    segment_clips,
)


def make_recording(duration_s, gaze_rate=30.0, frame_rate=2.0, with_frames=True):
    n = int(round(duration_s * gaze_rate)) + 1
    times = np.arange(n) / gaze_rate
    samples = [
        GazeSample(
            time_s=float(t),
            fix3d=np.array([1.0, 0.0, float(t)]),
            dir3d=np.array([1.0, 0.0, 0.0]),
            g2d=np.array([0.5, 0.5]),
            depth_m=1.0,
            rot=np.array([1.0, 0.0, 0.0, 0.0]),
            trans=np.zeros(3),
            valid=True,
        )
        for t in times
    ]
    frames = None
    if with_frames:
        nf = int(round(duration_s * frame_rate)) + 1
        ftimes = np.arange(nf) / frame_rate
        imgs = np.zeros((nf, 8, 8, 3), dtype=np.uint8)
        imgs[:, 0, 0, 0] = np.arange(nf) % 256  # tag frames by index
        frames = ArrayFrameSource(ftimes, imgs)
    return Recording(
        id="r",
        frames=frames,
        gaze=GazeSequence(samples, rate_hz=gaze_rate),
        scenario="s",
        subtask="a",
        skill=0,
        split="train",
        k_classes=2,
        frame_rate_hz=frame_rate if with_frames else None,
    )


def test_equally_spaced_starts_over_300s():
    rec = make_recording(300.0)
    clips = segment_clips(rec, n_clips=10)
    assert len(clips) == 10
    starts = [c.frame_times[0] for c in clips]
    expected = [i * (300.0 - CLIP_SPAN_S) / 9 for i in range(10)]
    np.testing.assert_allclose(starts, expected, atol=0.25)
    # requested-grid spacing survives the nearest-frame lookup
    for c in clips:
        assert len(c.frame_times) == CLIP_LEN
        assert not c.padded
        spacing = np.diff(c.frame_times)
        assert np.all(spacing >= 0.0) and np.all(spacing <= 1.0)


def test_span_exactly_one_clip_gives_identical_clips():
    rec = make_recording(CLIP_SPAN_S)
    clips = segment_clips(rec, n_clips=10)
    assert len(clips) == 10
    first = clips[0]
    for c in clips[1:]:
        np.testing.assert_array_equal(c.frame_times, first.frame_times)
        np.testing.assert_array_equal(c.frames, first.frames)
        assert [s.time_s for s in c.gaze] == [s.time_s for s in first.gaze]


def test_short_recording_pads_with_last_sample():
    rec = make_recording(5.0)
    clips = segment_clips(rec, n_clips=10)
    assert len(clips) == 1
    clip = clips[0]
    assert clip.padded
    # 0..5 s covers 11 grid points; the last 5 repeat the final frame/gaze
    tags = clip.frames[:, 0, 0, 0]
    assert np.all(tags[-5:] == tags[10])
    gaze_times = np.array([s.time_s for s in clip.gaze])
    assert np.all(gaze_times[-5:] == gaze_times[10])
    assert len({s.time_s for s in clip.gaze[-7:]}) == 2


def test_gaze_only_recording_uses_requested_grid():
    rec = make_recording(40.0, with_frames=False)
    clips = segment_clips(rec, n_clips=10)
    assert len(clips) == 10
    for c in clips:
        assert c.frames is None
        np.testing.assert_allclose(np.diff(c.frame_times), 0.5)


def test_every_frame_time_within_span():
    rec = make_recording(33.3)
    for c in segment_clips(rec, n_clips=10):
        assert c.frame_times[0] >= rec.start_s - 1e-9
        assert c.frame_times[-1] <= rec.start_s + rec.span_s + 1e-9


@pytest.mark.parametrize("n_clips", [1, 3, 10])
def test_output_count_is_n_clips(n_clips):
    rec = make_recording(60.0)
    assert len(segment_clips(rec, n_clips=n_clips)) == n_clips


def test_alignment_skew_warning():
    rec = make_recording(40.0, frame_rate=0.5)  # 2 s frame period -> skew > 0.25 s
    with pytest.warns(UserWarning, match="skew"):
        segment_clips(rec, n_clips=10)
