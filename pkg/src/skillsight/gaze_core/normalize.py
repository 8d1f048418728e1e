"""Per-frame gaze feature construction with bias-removing normalization.

Raw world-frame gaze signals depend on where the recording happened and
which way the wearer faced, so each modality is normalized to remove that
bias before it reaches a model:

(a) fixation points: centered by the segment mean, then rotated about the
    vertical axis so the first frame's gaze point has a zero lateral
    coordinate (and a non-negative forward coordinate);
(b) gaze direction: passed through unchanged (already wearer-centric);
(c) 2D gaze projection: passed through, clamped to [0,1]^2;
(d) gaze depth: passed through;
(e) glasses rotation: stored as rotation relative to the first frame
    (conj(q0) * qt, hemisphere-normalized), so frame 0 is exactly the
    identity quaternion; the reference keeps the wearer's true head tilt,
    only the shared yaw cancels;
(f) glasses translation: centered by the segment mean, then rotated about
    the vertical axis so the first horizontal movement points along the
    forward axis.

With the default z-up world frame the horizontal axes are (forward, lateral)
= (x, y), so after (a) the first frame's fixation point satisfies y == 0,
and any global yaw rotation + translation of the inputs cancels out.

Invalid samples are imputed by holding the last valid sample (sequence
length must be preserved for fixed-size models); the original validity is
appended to the feature row as a 0/1 flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import EmptyInputError, InvalidAnchorError
from . import quat
from .types import DEFAULT_UP_AXIS, GazeSample, GazeSequence

# Fixed feature-row layout shared by the teacher's gaze encoder and the
# student. One row per frame.
FEATURE_FIELDS = (
    ("fix3d", 3),
    ("dir3d", 3),
    ("g2d", 2),
    ("depth", 1),
    ("rel_rot", 4),
    ("trans", 3),
    ("valid", 1),
)
FEATURE_DIM = sum(n for _, n in FEATURE_FIELDS)  # 17

FEATURE_SLICES: dict[str, slice] = {}
_off = 0
for _name, _n in FEATURE_FIELDS:
    FEATURE_SLICES[_name] = slice(_off, _off + _n)
    _off += _n
del _off, _name, _n

# (forward, lateral) horizontal axis indices for each up axis, chosen so
# that forward x lateral = up (right-handed).
_HORIZONTAL = {"z": (0, 1), "y": (2, 0), "x": (1, 2)}

_MOVE_EPS = 1e-9  # below this, a horizontal displacement is "no movement"


@dataclass
class NormalizedGaze:
    """Per-frame numeric feature rows in the documented fixed layout."""

    features: np.ndarray  # (n_frames, FEATURE_DIM) float64
    up_axis: str = DEFAULT_UP_AXIS

    def __len__(self) -> int:
        return len(self.features)

    def field(self, name: str) -> np.ndarray:
        return self.features[:, FEATURE_SLICES[name]]


def _impute_hold_last_valid(samples: Sequence[GazeSample]):
    """Replace invalid samples with the most recent valid one.

    Returns stacked arrays plus the original validity flags. Raises if the
    first sample is invalid (the caller must re-anchor) or all are invalid.
    """
    valid = np.array([s.valid for s in samples], dtype=bool)
    if not valid.any():
        raise EmptyInputError("all gaze samples are invalid")
    if not valid[0]:
        first = int(np.argmax(valid))
        raise InvalidAnchorError(
            f"first sample invalid; first valid sample is at index {first}",
            first_valid_index=first,
        )
    held = []
    last = samples[0]
    for s in samples:
        if s.valid:
            last = s
        held.append(last)
    fix3d = np.stack([s.fix3d for s in held]).astype(float)
    dir3d = np.stack([s.dir3d for s in held]).astype(float)
    g2d = np.stack([s.g2d for s in held]).astype(float)
    depth = np.array([s.depth_m for s in held], dtype=float)
    rot = np.stack([s.rot for s in held]).astype(float)
    trans = np.stack([s.trans for s in held]).astype(float)
    return fix3d, dir3d, g2d, depth, rot, trans, valid


def _yaw_rotate(points: np.ndarray, up_axis: str, angle_rad: float) -> np.ndarray:
    """Rotate points about the vertical axis by angle (forward toward lateral)."""
    fwd, lat = _HORIZONTAL[up_axis]
    out = points.copy()
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    f, l = points[..., fwd], points[..., lat]
    out[..., fwd] = c * f - s * l
    out[..., lat] = s * f + c * l
    return out


def _canonical_yaw_angle(point: np.ndarray, up_axis: str) -> float:
    """Yaw angle that maps `point`'s horizontal bearing onto +forward."""
    fwd, lat = _HORIZONTAL[up_axis]
    if abs(point[fwd]) < _MOVE_EPS and abs(point[lat]) < _MOVE_EPS:
        return 0.0
    return -float(np.arctan2(point[lat], point[fwd]))


def normalize_gaze(
    seq: GazeSequence | Sequence[GazeSample],
    up_axis: str = DEFAULT_UP_AXIS,
) -> NormalizedGaze:
    """Apply the six per-modality rules and emit fixed-layout feature rows.

    Accepts a GazeSequence or a plain list of samples (clip gaze may repeat
    timestamps when padded, which a GazeSequence would reject).
    """
    samples = seq.samples if isinstance(seq, GazeSequence) else list(seq)
    if not samples:
        raise EmptyInputError("gaze sequence is empty")
    fix3d, dir3d, g2d, depth, rot, trans, valid = _impute_hold_last_valid(samples)

    # (a) fixation points: center, then cancel yaw via the first gaze point
    fix_c = fix3d - fix3d.mean(axis=0)
    fix_n = _yaw_rotate(fix_c, up_axis, _canonical_yaw_angle(fix_c[0], up_axis))
    # pin frame 0 so its postcondition (zero lateral coordinate) is exact
    fwd0, lat0 = _HORIZONTAL[up_axis]
    fix_n[0, fwd0] = np.hypot(fix_c[0, fwd0], fix_c[0, lat0])
    fix_n[0, lat0] = 0.0

    # (e) rotation relative to frame 0; frame 0 is exactly identity
    rel = quat.hemisphere(quat.normalize(quat.relative(rot[0], rot)))
    rel[0] = quat.IDENTITY

    # (f) translation: center, then first horizontal movement defines +forward
    tr_c = trans - trans.mean(axis=0)
    deltas = np.diff(tr_c, axis=0)
    fwd, lat = _HORIZONTAL[up_axis]
    horiz = np.hypot(deltas[:, fwd], deltas[:, lat]) if len(deltas) else np.array([])
    move = np.nonzero(horiz > _MOVE_EPS)[0]
    if len(move):
        tr_n = _yaw_rotate(
            tr_c, up_axis, _canonical_yaw_angle(deltas[move[0]], up_axis)
        )
    else:
        tr_n = tr_c

    rows = np.concatenate(
        [
            fix_n,
            dir3d,
            np.clip(g2d, 0.0, 1.0),
            depth[:, None],
            rel,
            tr_n,
            valid.astype(float)[:, None],
        ],
        axis=1,
    )
    return NormalizedGaze(features=rows, up_axis=up_axis)


def clip_feature_rows(
    samples: Sequence[GazeSample], up_axis: str = DEFAULT_UP_AXIS
) -> np.ndarray:
    """Feature rows for a clip's gaze, re-anchoring when frame 0 is invalid.

    Model input construction must never fail on tracker dropouts, so leading
    invalid samples are back-filled from the first valid one (their validity
    flag stays 0). An all-invalid clip yields all-zero rows.
    """
    samples = list(samples)
    try:
        return normalize_gaze(samples, up_axis=up_axis).features
    except InvalidAnchorError as err:
        anchor = samples[err.first_valid_index]
        patched = []
        for i, s in enumerate(samples):
            if i < err.first_valid_index:
                patched.append(
                    GazeSample(
                        time_s=s.time_s,
                        fix3d=anchor.fix3d,
                        dir3d=anchor.dir3d,
                        g2d=anchor.g2d,
                        depth_m=anchor.depth_m,
                        rot=anchor.rot,
                        trans=anchor.trans,
                        valid=True,
                    )
                )
            else:
                patched.append(s)
        rows = normalize_gaze(patched, up_axis=up_axis).features
        rows[:, FEATURE_SLICES["valid"]] = np.array(
            [float(s.valid) for s in samples]
        )[:, None]
        return rows
    except EmptyInputError:
        return np.zeros((len(samples), FEATURE_DIM))
