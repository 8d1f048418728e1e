from .clips import CLIP_FPS, CLIP_LEN, CLIP_PERIOD_S, CLIP_SPAN_S, segment_clips
from .io import (
    ArrayFrameSource,
    DirectoryFrameSource,
    load_dataset,
    load_recording,
    save_recording,
)
from .normalize import (
    FEATURE_DIM,
    FEATURE_FIELDS,
    FEATURE_SLICES,
    NormalizedGaze,
    clip_feature_rows,
    normalize_gaze,
)
from .types import (
    Clip,
    FrameSource,
    GazeSample,
    GazeSequence,
    Recording,
)

__all__ = [
    "ArrayFrameSource",
    "CLIP_FPS",
    "CLIP_LEN",
    "CLIP_PERIOD_S",
    "CLIP_SPAN_S",
    "Clip",
    "DirectoryFrameSource",
    "FEATURE_DIM",
    "FEATURE_FIELDS",
    "FEATURE_SLICES",
    "FrameSource",
    "GazeSample",
    "GazeSequence",
    "NormalizedGaze",
    "Recording",
    "clip_feature_rows",
    "load_dataset",
    "load_recording",
    "normalize_gaze",
    "save_recording",
    "segment_clips",
]
