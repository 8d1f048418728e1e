"""Gaze-induced attention: Gaussian patch prior and attention-logit bias.

An image frame is divided into a p x p grid of L x L-pixel patches. The
patch under the wearer's gaze gets a normalized Gaussian weight map over
the grid; scaled by a per-scenario learnable strength, that map is added to
the pre-softmax attention logits of the earliest spatial attention block,
so the video encoder can emphasize gazed regions from the first layer on.

All functions are differentiable torch ops (the bias strength receives a
gradient; the map itself is a fixed function of the gaze location).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .errors import ConfigError


@dataclass
class AttentionConfig:
    """Patch-grid geometry and gaze-bias settings for the video encoder."""

    grid_p: int = 8  # patches per side
    patch_len: int = 8  # pixels per patch side
    sigma: float = 1.5  # Gaussian width, in patch units
    lambda_init: float = 1.0  # initial per-scenario bias strength
    lambda_by_scenario: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.grid_p < 1:
            raise ConfigError("grid_p must be >= 1")
        if self.sigma <= 0:
            raise ConfigError("sigma must be > 0")
        if self.patch_len < 1:
            raise ConfigError("patch_len must be >= 1")


def gaze_patch(
    g2d, grid_p: int, patch_len: int, image_size: int
) -> torch.Tensor:
    """Patch index (column, row) containing a normalized gaze point.

    ``floor(g2d * image_size / patch_len)`` per axis, clamped to
    [0, grid_p - 1]; clamping absorbs gaze that projects out of frame.
    Accepts a single (2,) point or a batch (..., 2).
    """
    g = torch.as_tensor(g2d, dtype=torch.get_default_dtype())
    px = g * float(image_size)
    c = torch.floor(px / float(patch_len)).long()
    return torch.clamp(c, 0, grid_p - 1)


def gaussian_map(c, grid_p: int, sigma: float) -> torch.Tensor:
    """Normalized Gaussian over the patch grid, centered on patch c.

    Weights exp(-d/(2 sigma^2)) with d the squared grid-index distance to
    c, normalized to sum to 1. Returned as (..., grid_p, grid_p) indexed
    [row, col]; ``c`` is (column, row) as produced by ``gaze_patch``.
    """
    if sigma <= 0:
        raise ConfigError("sigma must be > 0")
    c = torch.as_tensor(c)
    if c.shape[-1] != 2:
        raise ValueError(f"gaze patch index must have 2 components, got {tuple(c.shape)}")
    ar = torch.arange(grid_p, dtype=torch.float64)
    rows = ar.view(-1, 1).expand(grid_p, grid_p)
    cols = ar.view(1, -1).expand(grid_p, grid_p)
    cx = c[..., 0].to(torch.float64).unsqueeze(-1).unsqueeze(-1)
    cy = c[..., 1].to(torch.float64).unsqueeze(-1).unsqueeze(-1)
    d = (cols - cx) ** 2 + (rows - cy) ** 2
    w = torch.exp(-d / (2.0 * sigma**2))
    return w / w.sum(dim=(-2, -1), keepdim=True)


def modify_attention(attn_logits: torch.Tensor, gaze_map: torch.Tensor, lambda_c):
    """Softmax of attention logits plus a gaze bias on the key axis.

    ``attn_logits`` has shape (..., queries, keys); ``gaze_map`` is either a
    flattened (..., keys) map or an unflattened (..., p, p) grid with
    p*p == keys. Every query row receives the same additive bias
    ``lambda_c * gaze_map``. ``lambda_c`` may be a scalar or a tensor
    broadcastable against the logits (e.g. one strength per batch element).
    Rows of the result sum to 1; gradients flow through the logits and
    ``lambda_c``.
    """
    n_keys = attn_logits.shape[-1]
    if gaze_map.shape[-2:] == (gaze_map.shape[-1],) * 2 and gaze_map.dim() >= 2:
        if gaze_map.shape[-1] * gaze_map.shape[-2] == n_keys:
            gaze_map = gaze_map.reshape(*gaze_map.shape[:-2], n_keys)
    if gaze_map.shape[-1] != n_keys:
        raise ValueError(
            f"gaze map has {gaze_map.shape[-1]} entries but logits have "
            f"{n_keys} keys"
        )
    lam = torch.as_tensor(lambda_c, dtype=attn_logits.dtype)
    bias = lam * gaze_map.to(attn_logits.dtype)
    return torch.softmax(attn_logits + bias.unsqueeze(-2), dim=-1)
