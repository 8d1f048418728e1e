"""Video+gaze teacher: three encoders and a fusion head.

The teacher fuses (1) a divided space-time video transformer whose first
spatial attention block is biased toward the gazed patch, (2) a temporal
encoder over embeddings of gaze-centered image crops, and (3) a transformer
over normalized gaze feature rows. The three embeddings are concatenated
and classified by a 3-layer MLP.

Desk-scale defaults (64 px frames, width 128) keep every mechanism intact
while training in minutes on CPU; paper-scale widths belong in config files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn
from torch.nn import functional as F

from .attention import AttentionConfig, gaussian_map, gaze_patch
from .errors import ConfigError, UnsupportedModalityError
from .nn import ConvImageEmbedder, SelfAttention, FeedForward, TokenTransformer, mlp_head


@dataclass
class OptimConfig:
    kind: str = "sgd"  # sgd | adamw
    lr: float = 5e-3
    batch_size: int = 8
    epochs: int = 15
    momentum: float = 0.9  # sgd only


@dataclass
class VideoEncoderConfig:
    layers: int = 4
    heads: int = 4
    width: int = 128
    frames: int = 16
    image_size: int = 64


@dataclass
class ImageEncoderConfig:
    kind: str = "conv-small"  # conv-small | external
    width: int = 128
    input_px: int = 16
    import_path: str | None = None  # "pkg.module:factory" for kind=external


@dataclass
class TemporalEncoderConfig:
    layers: int = 2
    heads: int = 4
    width: int = 128


@dataclass
class GazeEncoderConfig:
    layers: int = 4
    heads: int = 4
    width: int = 128


@dataclass
class TeacherAblation:
    """Component switches; all on reproduces the full model.

    With gaze_attention, crop_encoder and gaze_encoder all off, the model
    is exactly a plain video classifier (masked branches contribute zero
    embeddings and the attention-bias hook is bypassed).
    """

    video_encoder: bool = True
    gaze_attention: bool = True
    crop_encoder: bool = True
    gaze_encoder: bool = True


@dataclass
class TeacherConfig:
    video: VideoEncoderConfig = field(default_factory=VideoEncoderConfig)
    image: ImageEncoderConfig = field(default_factory=ImageEncoderConfig)
    temporal: TemporalEncoderConfig = field(default_factory=TemporalEncoderConfig)
    gaze: GazeEncoderConfig = field(default_factory=GazeEncoderConfig)
    attention: AttentionConfig = field(default_factory=AttentionConfig)
    fusion_hidden: tuple[int, ...] = (256, 128)
    k_classes: int = 2
    crop_frac: float = 0.25  # crop window side as a fraction of image side
    optimizer: OptimConfig = field(default_factory=OptimConfig)
    ablation: TeacherAblation = field(default_factory=TeacherAblation)
    seed: int = 0

    def __post_init__(self):
        if self.video.image_size != self.attention.grid_p * self.attention.patch_len:
            raise ConfigError(
                f"image_size {self.video.image_size} != grid_p*patch_len "
                f"{self.attention.grid_p * self.attention.patch_len}"
            )

    @classmethod
    def full_scale(cls, k_classes: int = 4) -> "TeacherConfig":
        """Paper-scale widths (for config files and power profiles)."""
        return cls(
            video=VideoEncoderConfig(layers=12, heads=12, width=768, image_size=224),
            image=ImageEncoderConfig(kind="external", width=768, input_px=224),
            temporal=TemporalEncoderConfig(layers=4, heads=12, width=768),
            gaze=GazeEncoderConfig(layers=4, heads=12, width=768),
            attention=AttentionConfig(grid_p=14, patch_len=16),
            fusion_hidden=(1024, 512),
            k_classes=k_classes,
        )


@dataclass
class TeacherEmbeddings:
    """Per-branch embeddings plus fused skill logits."""

    e_v: torch.Tensor  # (b, video width)
    e_c: torch.Tensor  # (b, temporal width)
    e_g: torch.Tensor  # (b, gaze width)
    logits: torch.Tensor  # (b, k_classes)

    def concat(self) -> torch.Tensor:
        return torch.cat([self.e_v, self.e_c, self.e_g], dim=-1)


def crop_boxes(g2d: torch.Tensor, image_side: int, crop_frac: float):
    """Integer crop boxes centered on gaze, clamped inside the image.

    Returns (start, size): start is (..., 2) in (column, row) pixel order,
    the box covers [start, start + size) per axis.
    """
    size = math.ceil(crop_frac * image_side)
    size = max(1, min(size, image_side))
    g = torch.clamp(torch.as_tensor(g2d, dtype=torch.float64), 0.0, 1.0)
    ideal = g * image_side - size / 2.0
    start = torch.floor(ideal + 0.5).long()
    return torch.clamp(start, 0, image_side - size), size


def build_image_embedder(cfg: ImageEncoderConfig) -> nn.Module:
    """Image embedder factory; external pretrained encoders plug in here.

    An external encoder is any module with ``embed_dim``/``input_px``
    attributes mapping (b, 3, s, s) to (b, embed_dim), named by
    ``import_path`` as "package.module:factory".
    """
    if cfg.kind == "conv-small":
        return ConvImageEmbedder(cfg.width, cfg.input_px)
    if cfg.kind == "external":
        if not cfg.import_path:
            raise ConfigError("image encoder kind 'external' needs import_path")
        import importlib

        mod_name, _, attr = cfg.import_path.partition(":")
        factory = getattr(importlib.import_module(mod_name), attr)
        encoder = factory()
        for name in ("embed_dim", "input_px"):
            if not hasattr(encoder, name):
                raise ConfigError(f"external image encoder lacks '{name}'")
        return encoder
    raise ConfigError(f"unknown image encoder kind '{cfg.kind}'")


class DividedSTBlock(nn.Module):
    """Divided space-time block: temporal attn, spatial attn, shared FFN.

    The class token joins each frame's spatial attention as a replicated
    query; its per-frame updates are averaged back into the single token.
    Temporal attention runs per patch location over time, patches only.
    """

    def __init__(self, dim: int, n_heads: int, ffn_mult: int = 4):
        super().__init__()
        self.ln_t = nn.LayerNorm(dim)
        self.attn_t = SelfAttention(dim, n_heads)
        self.ln_s = nn.LayerNorm(dim)
        self.attn_s = SelfAttention(dim, n_heads)
        self.ln_f = nn.LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_mult)

    def forward(self, x, cls, spatial_bias=None, lam=None):
        b, t, p, d = x.shape
        h = self.ln_t(x).permute(0, 2, 1, 3).reshape(b * p, t, d)
        h = self.attn_t(h).reshape(b, p, t, d).permute(0, 2, 1, 3)
        x = x + h

        cls_rep = cls.unsqueeze(1).expand(b, t, 1, d)
        tok = torch.cat([cls_rep, x], dim=2)  # (b, t, 1+p, d)
        h = self.ln_s(tok).reshape(b * t, 1 + p, d)
        if spatial_bias is not None:
            a = self.attn_s(h, spatial_bias.reshape(b * t, 1 + p), lam)
        else:
            a = self.attn_s(h)
        a = a.reshape(b, t, 1 + p, d)
        x = x + a[:, :, 1:]
        cls = cls + a[:, :, 0].mean(dim=1, keepdim=True)

        x = x + self.ffn(self.ln_f(x))
        cls = cls + self.ffn(self.ln_f(cls))
        return x, cls


class VideoTransformer(nn.Module):
    """Divided space-time transformer over 16 frames with a gaze hook.

    The gaze bias (a Gaussian over patch keys, scaled per scenario) enters
    only the first block's spatial attention; the class-token key column
    receives no bias.
    """

    def __init__(self, cfg: VideoEncoderConfig, attn_cfg: AttentionConfig):
        super().__init__()
        self.cfg = cfg
        self.attn_cfg = attn_cfg
        p = attn_cfg.grid_p
        self.n_patches = p * p
        d = cfg.width
        self.patch_embed = nn.Conv2d(3, d, attn_cfg.patch_len, stride=attn_cfg.patch_len)
        self.cls = nn.Parameter(torch.zeros(1, d))
        self.pos_spatial = nn.Parameter(torch.zeros(1, 1, self.n_patches, d))
        self.pos_temporal = nn.Parameter(torch.zeros(1, cfg.frames, 1, d))
        nn.init.normal_(self.cls, std=0.02)
        nn.init.normal_(self.pos_spatial, std=0.02)
        nn.init.normal_(self.pos_temporal, std=0.02)
        self.blocks = nn.ModuleList(
            DividedSTBlock(d, cfg.heads) for _ in range(cfg.layers)
        )
        self.ln = nn.LayerNorm(d)

    def forward(self, frames, g2d=None, lam=None):
        """frames (b, t, 3, s, s); g2d (b, t, 2) enables the gaze bias."""
        b, t = frames.shape[:2]
        if frames.shape[-2:] != (self.cfg.image_size, self.cfg.image_size):
            raise ValueError(
                f"frames are {tuple(frames.shape[-2:])} but the video encoder "
                f"is configured for {self.cfg.image_size}px inputs"
            )
        x = self.patch_embed(frames.reshape(b * t, *frames.shape[2:]))
        x = x.flatten(2).transpose(1, 2).reshape(b, t, self.n_patches, -1)
        x = x + self.pos_spatial + self.pos_temporal
        cls = self.cls.unsqueeze(0).expand(b, 1, -1)

        bias = None
        lam_bt = None
        if g2d is not None:
            p = self.attn_cfg.grid_p
            c = gaze_patch(g2d, p, self.attn_cfg.patch_len, self.cfg.image_size)
            amap = gaussian_map(c, p, self.attn_cfg.sigma).to(frames.dtype)
            amap = amap.reshape(b, t, self.n_patches)
            # zero bias on the class-token key column
            bias = F.pad(amap, (1, 0)).reshape(b * t, 1 + self.n_patches)
            lam_bt = lam.reshape(b, 1).expand(b, t).reshape(b * t, 1, 1)

        for i, blk in enumerate(self.blocks):
            if i == 0 and bias is not None:
                x, cls = blk(x, cls, spatial_bias=bias, lam=lam_bt)
            else:
                x, cls = blk(x, cls)
        return self.ln(cls).squeeze(1)


class SkillTeacher(nn.Module):
    """Three-branch teacher with per-scenario gaze-bias strengths."""

    def __init__(self, cfg: TeacherConfig, scenarios: list[str]):
        super().__init__()
        self.cfg = cfg
        self.scenarios = list(scenarios)
        if not self.scenarios:
            raise ConfigError("teacher needs at least one scenario")
        init = [
            cfg.attention.lambda_by_scenario.get(s, cfg.attention.lambda_init)
            for s in self.scenarios
        ]
        self.lambda_c = nn.Parameter(torch.tensor(init, dtype=torch.float32))

        self.video = VideoTransformer(cfg.video, cfg.attention)
        self.image_embed = build_image_embedder(cfg.image)
        self.temporal = TokenTransformer(
            dim=cfg.temporal.width,
            n_layers=cfg.temporal.layers,
            n_heads=cfg.temporal.heads,
            seq_len=cfg.video.frames,
        )
        if self.image_embed.embed_dim != cfg.temporal.width:
            raise ConfigError("image embedder width must match temporal width")

        from .gaze_core import FEATURE_DIM

        self.gaze_proj = nn.Linear(FEATURE_DIM, cfg.gaze.width)
        self.gaze_enc = TokenTransformer(
            dim=cfg.gaze.width,
            n_layers=cfg.gaze.layers,
            n_heads=cfg.gaze.heads,
            seq_len=cfg.video.frames,
        )

        self.embed_dims = (cfg.video.width, cfg.temporal.width, cfg.gaze.width)
        fused = sum(self.embed_dims)
        self.fusion = mlp_head([fused, *cfg.fusion_hidden, cfg.k_classes])

    @property
    def lambda_by_scenario(self) -> dict[str, float]:
        values = self.lambda_c.detach()
        return {s: float(v) for s, v in zip(self.scenarios, values)}

    def encode_video(self, frames, g2d, scenario_idx) -> torch.Tensor:
        if frames is None:
            raise UnsupportedModalityError("teacher video encoder requires frames")
        if self.cfg.ablation.gaze_attention:
            lam = self.lambda_c[scenario_idx]
            return self.video(frames, g2d=g2d, lam=lam)
        return self.video(frames)

    def encode_crops(self, frames, g2d) -> torch.Tensor:
        if frames is None:
            raise UnsupportedModalityError("teacher crop encoder requires frames")
        b, t = frames.shape[:2]
        side = self.cfg.video.image_size
        start, size = crop_boxes(g2d, side, self.cfg.crop_frac)
        flat = frames.reshape(b * t, *frames.shape[2:])
        sf = start.reshape(b * t, 2)
        crops = torch.stack(
            [
                flat[i, :, sf[i, 1] : sf[i, 1] + size, sf[i, 0] : sf[i, 0] + size]
                for i in range(b * t)
            ]
        )
        px = self.image_embed.input_px
        if size != px:
            crops = F.interpolate(crops, size=(px, px), mode="bilinear", align_corners=False)
        emb = self.image_embed(crops).reshape(b, t, -1)
        return self.temporal(emb)[:, 0]

    def encode_gaze_dynamics(self, gaze_feats) -> torch.Tensor:
        from .gaze_core import FEATURE_DIM

        if gaze_feats.shape[-1] != FEATURE_DIM:
            raise ValueError(
                f"gaze feature rows must have {FEATURE_DIM} values, "
                f"got {gaze_feats.shape[-1]}"
            )
        tokens = self.gaze_proj(gaze_feats)
        return self.gaze_enc(tokens)[:, 0]

    def forward(self, batch) -> TeacherEmbeddings:
        """batch: ClipBatch with frames, g2d, gaze_feats, scenario_idx."""
        ab = self.cfg.ablation
        b = batch.gaze_feats.shape[0]
        dv, dc, dg = self.embed_dims
        dtype = batch.gaze_feats.dtype
        device = batch.gaze_feats.device

        if ab.video_encoder:
            e_v = self.encode_video(batch.frames, batch.g2d, batch.scenario_idx)
        else:
            e_v = torch.zeros(b, dv, dtype=dtype, device=device)
        if ab.crop_encoder:
            e_c = self.encode_crops(batch.frames, batch.g2d)
        else:
            e_c = torch.zeros(b, dc, dtype=dtype, device=device)
        if ab.gaze_encoder:
            e_g = self.encode_gaze_dynamics(batch.gaze_feats)
        else:
            e_g = torch.zeros(b, dg, dtype=dtype, device=device)

        logits = self.fusion(torch.cat([e_v, e_c, e_g], dim=-1))
        return TeacherEmbeddings(e_v=e_v, e_c=e_c, e_g=e_g, logits=logits)

    def clip_logits(self, batch) -> torch.Tensor:
        return self.forward(batch).logits
