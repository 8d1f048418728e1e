import numpy as np
import pytest
import torch

from skillsight.attention import AttentionConfig
from skillsight.gaze_core import FEATURE_DIM, GazeSample, GazeSequence
from skillsight.gaze_core.quat import from_axis_angle, mul as quat_mul, normalize
from skillsight.student import StudentConfig
from skillsight.teacher import (
    GazeEncoderConfig,
    ImageEncoderConfig,
    TeacherConfig,
    TemporalEncoderConfig,
    VideoEncoderConfig,
)
from skillsight.training import ClipBatch


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(max(1, torch.get_num_threads()))
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_unit(rng, n=None):
    shape = (3,) if n is None else (n, 3)
    v = rng.normal(size=shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_quat(rng, n=None):
    shape = (4,) if n is None else (n, 4)
    return normalize(rng.normal(size=shape))


def make_sequence(rng, n=32, rate_hz=30.0, all_valid=True) -> GazeSequence:
    """Random but invariant-respecting gaze sequence."""
    times = np.arange(n) / rate_hz
    dirs = random_unit(rng, n)
    quats = random_quat(rng, n)
    trans = rng.normal(scale=0.5, size=(n, 3)) + np.array([0.0, 0.0, 1.6])
    depth = rng.uniform(0.3, 3.0, size=n)
    fix = trans + dirs * depth[:, None]
    g2d = rng.uniform(0.0, 1.0, size=(n, 2))
    valid = np.ones(n, dtype=bool)
    if not all_valid:
        valid[rng.random(n) < 0.2] = False
        valid[0] = True
    samples = [
        GazeSample(
            time_s=float(times[i]),
            fix3d=fix[i],
            dir3d=dirs[i],
            g2d=g2d[i],
            depth_m=float(depth[i]),
            rot=quats[i],
            trans=trans[i],
            valid=bool(valid[i]),
        )
        for i in range(n)
    ]
    return GazeSequence(samples, rate_hz=rate_hz)


def tiny_teacher_cfg(k_classes=2, **overrides) -> TeacherConfig:
    cfg = TeacherConfig(
        video=VideoEncoderConfig(layers=2, heads=2, width=32, frames=16, image_size=32),
        image=ImageEncoderConfig(width=32, input_px=8),
        temporal=TemporalEncoderConfig(layers=1, heads=2, width=32),
        gaze=GazeEncoderConfig(layers=1, heads=2, width=32),
        attention=AttentionConfig(grid_p=4, patch_len=8),
        fusion_hidden=(32, 16),
        k_classes=k_classes,
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def tiny_student_cfg(k_classes=2, n_subtasks=3, **overrides) -> StudentConfig:
    cfg = StudentConfig(
        layers=1, heads=2, width=32, k_classes=k_classes, n_subtasks=n_subtasks
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def make_batch(rng, b=2, frames=16, image_size=32, k_classes=2, n_subtasks=3,
               dtype=torch.float32) -> ClipBatch:
    return ClipBatch(
        gaze_feats=torch.tensor(
            rng.normal(size=(b, frames, FEATURE_DIM)), dtype=dtype
        ),
        g2d=torch.tensor(rng.uniform(0, 1, size=(b, frames, 2)), dtype=dtype),
        frames=torch.tensor(
            rng.uniform(0, 1, size=(b, frames, 3, image_size, image_size)), dtype=dtype
        ),
        scenario_idx=torch.zeros(b, dtype=torch.long),
        skill=torch.tensor(rng.integers(0, k_classes, size=b), dtype=torch.long),
        subtask_idx=torch.tensor(rng.integers(0, n_subtasks, size=b), dtype=torch.long),
    )


def yaw_and_translate(seq: GazeSequence, angle_rad: float, offset) -> GazeSequence:
    """Rigidly transform world-frame signals: rotate about +z, then shift."""
    qz = from_axis_angle([0.0, 0.0, 1.0], angle_rad)
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    rot_z = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    offset = np.asarray(offset, dtype=float)
    samples = []
    for smp in seq.samples:
        samples.append(
            GazeSample(
                time_s=smp.time_s,
                fix3d=rot_z @ smp.fix3d + offset,
                dir3d=smp.dir3d,
                g2d=smp.g2d,
                depth_m=smp.depth_m,
                rot=quat_mul(qz, smp.rot),
                trans=rot_z @ smp.trans + offset,
                valid=smp.valid,
            )
        )
    return GazeSequence(samples, rate_hz=seq.rate_hz)
