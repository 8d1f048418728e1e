"""Clip sampling protocol: 10 equally spaced 16-frame clips at 2 FPS.

A recording is summarized by ``n_clips`` clips whose start times are
equally spaced over [start, start + span - clip_span]; predictions over
the clips are later averaged. Short recordings fall back to a single clip
padded by repeating the last frame/gaze sample.
"""

from __future__ import annotations

import warnings

import numpy as np

from .types import Clip, Recording

CLIP_LEN = 16  # frames per clip
CLIP_FPS = 2.0
CLIP_PERIOD_S = 1.0 / CLIP_FPS
CLIP_SPAN_S = (CLIP_LEN - 1) * CLIP_PERIOD_S  # 7.5 s first-to-last frame

ALIGN_WARN_S = 0.25  # half the 2 FPS period


def _nearest_indices(times: np.ndarray, wanted: np.ndarray) -> np.ndarray:
    """Nearest-timestamp lookup (ties resolve to the earlier sample)."""
    idx = np.searchsorted(times, wanted)
    idx = np.clip(idx, 1, len(times) - 1)
    left = times[idx - 1]
    right = times[idx]
    use_left = (wanted - left) <= (right - wanted)
    out = np.where(use_left, idx - 1, idx)
    out[wanted <= times[0]] = 0
    return out


def segment_clips(rec: Recording, n_clips: int = 10) -> list[Clip]:
    """Cut a recording into clips on the 2 FPS grid.

    The clip grid is anchored on the gaze timeline (present in every
    recording) so that outputs are identical whether or not frames exist.
    Gaze and frames are aligned to the grid by nearest timestamp; a warning
    is emitted when frame alignment skew exceeds a quarter second.
    """
    t0 = rec.start_s
    span = rec.span_s
    offsets = np.arange(CLIP_LEN) * CLIP_PERIOD_S

    padded = span < CLIP_SPAN_S
    if padded:
        starts = np.array([0.0])
    else:
        starts = np.linspace(0.0, span - CLIP_SPAN_S, n_clips)

    gaze_times = rec.gaze.times
    clips = []
    for k, start in enumerate(starts):
        wanted = t0 + start + offsets
        g_idx = _nearest_indices(gaze_times, wanted)
        gaze = [rec.gaze.samples[i] for i in g_idx]

        if rec.frames is not None and len(rec.frames) > 0:
            f_idx = np.array([rec.frames.nearest_index(t) for t in wanted])
            # frames outside the recording (gaze) span are never selected
            ft = rec.frames.times
            lo = int(np.searchsorted(ft, t0 - 1e-9, side="left"))
            hi = int(np.searchsorted(ft, t0 + span + 1e-9, side="right")) - 1
            if lo <= hi:
                f_idx = np.clip(f_idx, lo, hi)
            frame_times = rec.frames.times[f_idx]
            skew = np.abs(frame_times - wanted)
            if np.any(skew > ALIGN_WARN_S) and not padded:
                warnings.warn(
                    f"clip {k} of {rec.id}: frame alignment skew "
                    f"{skew.max():.3f}s exceeds {ALIGN_WARN_S}s",
                    stacklevel=2,
                )
            frames = np.stack([rec.frames.get(int(i)) for i in f_idx])
        else:
            frame_times = wanted
            frames = None

        clips.append(
            Clip(
                recording_id=rec.id,
                frame_times=frame_times,
                frames=frames,
                gaze=gaze,
                padded=padded,
            )
        )
    return clips
