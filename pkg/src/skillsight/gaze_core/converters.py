"""Field mappings from public dataset releases to the recording format.

These stubs document how external dataset fields translate to our schema;
running a conversion requires the corresponding dataset on disk, which desk
builds do not ship. Each map lists ``ours -> theirs`` with notes on units
and axis conventions. All converters must emit +z gravity-up world frames
(rotating axes if the source differs) and declare ``up_axis: "z"``.
"""

FIELD_MAPS = {
    # Ego-Exo4D proficiency-estimation takes with Aria MPS eye gaze.
    "ego-exo4d": {
        "t": "gaze CSV tracking_timestamp_us * 1e-6, rebased to take start",
        "fix3d": "MPS eye gaze point in world frame (left/right ray intersection)",
        "dir3d": "MPS combined gaze direction in CPF coordinates (unit)",
        "g2d": "gaze projected via RGB camera calibration, divided by (W, H)",
        "depth": "MPS depth_m",
        "quat": "closed-loop trajectory world<-device quaternion (w,x,y,z)",
        "trans": "closed-loop trajectory device position, meters",
        "valid": "gaze row present and not flagged low-confidence",
        "skill": "proficiency label {novice, early/intermediate/late expert} -> 0..3",
        "k_classes": 4,
        "notes": "Aria world frame is already gravity-aligned z-up.",
    },
    # Multi-Sense Badminton: 2D gaze only, no world-frame fixation points.
    "multisense-badminton": {
        "t": "sample index / eye-tracker rate",
        "fix3d": "unavailable; synthesize as dir3d * depth with depth fixed",
        "dir3d": "from 2D gaze angles via the headset FOV model",
        "g2d": "eye tracker normalized (x, y)",
        "depth": "unavailable; fixed nominal 4.0 m (court-scale)",
        "quat": "IMU orientation quaternion (reordered to w,x,y,z)",
        "trans": "unavailable; zeros",
        "valid": "tracker confidence > 0.6",
        "skill": "{beginner, intermediate, expert} -> 0..2",
        "k_classes": 3,
        "notes": "Follow the official swing segmentation for recording bounds.",
    },
    # Expert-Novice Soccer: gaze + body motion, no video.
    "expert-novice-soccer": {
        "t": "frame index / capture rate",
        "fix3d": "gaze intersection point in capture-volume frame (y-up -> z-up)",
        "dir3d": "normalized gaze vector in head frame",
        "g2d": "projected via the reference camera; clamp to [0,1]",
        "depth": "norm(fix3d - head position)",
        "quat": "head segment orientation (y-up -> z-up remap)",
        "trans": "head segment position, meters (y-up -> z-up remap)",
        "valid": "gaze marker visible",
        "skill": "{novice, expert} -> 0..1",
        "k_classes": 2,
        "notes": "No frames/ directory; recordings are gaze-only.",
    },
}


def convert(dataset: str, source_root, out_root):  # pragma: no cover - needs data
    """Convert a local copy of a public dataset. Requires the dataset."""
    if dataset not in FIELD_MAPS:
        raise KeyError(f"no converter mapping for '{dataset}'")
    raise NotImplementedError(
        f"converter for '{dataset}' runs only where the dataset exists; "
        "see FIELD_MAPS for the documented field mapping"
    )
