"""Gaze-only student with class, distillation, and action tokens.

The student is a transformer over 16 projected gaze feature rows plus three
learned tokens. The class token feeds the skill head, the action token
feeds the subtask head, and the distillation token's output feature is
matched (L1, after linear projections on both sides) to the teacher's
concatenated embedding. Frames never enter this path: the forward signature
admits gaze feature rows only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .errors import ConfigError
from .gaze_core import FEATURE_DIM
from .nn import TokenTransformer
from .teacher import OptimConfig

N_SPECIAL_TOKENS = 3  # class, distillation, action
TOKEN_CLS, TOKEN_DIS, TOKEN_ACT = range(N_SPECIAL_TOKENS)


@dataclass
class StudentConfig:
    layers: int = 4
    heads: int = 4
    width: int = 128
    frames: int = 16
    k_classes: int = 2
    n_subtasks: int = 1
    lambda_dis: float = 1.0  # weight of the distillation loss
    lambda_act: float = 0.5  # weight of the subtask cross-entropy
    common_dim: int | None = None  # projection width; defaults to `width`
    optimizer: OptimConfig = field(
        default_factory=lambda: OptimConfig(kind="adamw", lr=1e-4, batch_size=32, epochs=10)
    )
    seed: int = 0

    def __post_init__(self):
        if self.lambda_dis < 0 or self.lambda_act < 0:
            raise ConfigError("loss weights must be >= 0")
        if self.common_dim is None:
            self.common_dim = self.width
        if self.common_dim <= 0:
            raise ConfigError("common_dim must be > 0")

    @classmethod
    def full_scale(cls, k_classes: int = 4, n_subtasks: int = 1) -> "StudentConfig":
        return cls(width=768, heads=12, k_classes=k_classes, n_subtasks=n_subtasks)


@dataclass
class StudentOutput:
    e_s_hat: torch.Tensor  # (b, width) distillation-token feature
    skill_logits: torch.Tensor  # (b, k_classes)
    action_logits: torch.Tensor  # (b, n_subtasks)


class SkillStudent(nn.Module):
    def __init__(self, cfg: StudentConfig):
        super().__init__()
        self.cfg = cfg
        self.input_proj = nn.Linear(FEATURE_DIM, cfg.width)
        self.encoder = TokenTransformer(
            dim=cfg.width,
            n_layers=cfg.layers,
            n_heads=cfg.heads,
            seq_len=cfg.frames,
            n_special=N_SPECIAL_TOKENS,
        )
        self.skill_head = nn.Linear(cfg.width, cfg.k_classes)
        self.action_head = nn.Linear(cfg.width, cfg.n_subtasks)

    def forward(self, gaze_feats: torch.Tensor) -> StudentOutput:
        """gaze_feats: (b, frames, FEATURE_DIM) normalized feature rows."""
        if gaze_feats.shape[-1] != FEATURE_DIM:
            raise ValueError(
                f"gaze feature rows must have {FEATURE_DIM} values, "
                f"got {gaze_feats.shape[-1]}"
            )
        h = self.encoder(self.input_proj(gaze_feats))
        return StudentOutput(
            e_s_hat=h[:, TOKEN_DIS],
            skill_logits=self.skill_head(h[:, TOKEN_CLS]),
            action_logits=self.action_head(h[:, TOKEN_ACT]),
        )

    def clip_logits(self, batch) -> torch.Tensor:
        """Skill logits for a ClipBatch; reads only the gaze feature rows."""
        return self.forward(batch.gaze_feats).skill_logits


class DistillProjections(nn.Module):
    """Trainable linear maps aligning student and teacher feature spaces."""

    def __init__(self, student_dim: int, teacher_dim: int, common_dim: int):
        super().__init__()
        self.f_p = nn.Linear(student_dim, common_dim)
        self.f_t = nn.Linear(teacher_dim, common_dim)


def distillation_loss(
    e_s_hat: torch.Tensor,
    teacher_concat: torch.Tensor,
    proj: DistillProjections,
) -> torch.Tensor:
    """Mean absolute difference between the two projected features.

    The L1 norm is averaged over the common dimension so the loss weight is
    insensitive to width changes. The teacher feature is detached: only the
    student and the two projections receive gradients.
    """
    a = proj.f_p(e_s_hat)
    b = proj.f_t(teacher_concat.detach())
    if a.shape != b.shape:
        raise ValueError(
            f"projected dims differ: student {tuple(a.shape)} vs "
            f"teacher {tuple(b.shape)}"
        )
    return (a - b).abs().mean()
