"""Shared transformer building blocks (pre-LN, learned positions)."""

from __future__ import annotations

import torch
from torch import nn

from .attention import modify_attention


class SelfAttention(nn.Module):
    """Multi-head self-attention with an optional additive logit bias.

    When ``gaze_map``/``gaze_lambda`` are given, the pre-softmax logits of
    every query row are biased along the key axis via
    :func:`skillsight.attention.modify_attention`.
    """

    def __init__(self, dim: int, n_heads: int):
        super().__init__()
        if dim % n_heads:
            raise ValueError(f"dim {dim} not divisible by heads {n_heads}")
        self.n_heads = n_heads
        self.head_dim = dim // n_heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x, gaze_map=None, gaze_lambda=None):
        b, n, d = x.shape
        qkv = self.qkv(x).reshape(b, n, 3, self.n_heads, self.head_dim)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)  # each (b, heads, n, hd)
        logits = (q @ k.transpose(-2, -1)) / self.head_dim**0.5
        if gaze_map is not None:
            # map broadcast over heads: (b, 1, keys); lambda per batch element
            attn = modify_attention(logits, gaze_map.unsqueeze(1), gaze_lambda)
        else:
            attn = torch.softmax(logits, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, d)
        return self.proj(out)


class FeedForward(nn.Module):
    def __init__(self, dim: int, mult: int = 4):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(dim, mult * dim), nn.GELU(), nn.Linear(mult * dim, dim)
        )

    def forward(self, x):
        return self.net(x)


class EncoderBlock(nn.Module):
    def __init__(self, dim: int, n_heads: int, ffn_mult: int = 4):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, n_heads)
        self.ln2 = nn.LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_mult)

    def forward(self, x):
        x = x + self.attn(self.ln1(x))
        return x + self.ffn(self.ln2(x))


class TokenTransformer(nn.Module):
    """Transformer encoder over a token sequence with a class token.

    Prepends ``n_special`` learned tokens (the first is the class token),
    adds learned positional embeddings, runs the encoder stack, and returns
    the final hidden states after a last layer norm.
    """

    def __init__(
        self,
        dim: int,
        n_layers: int,
        n_heads: int,
        seq_len: int,
        n_special: int = 1,
        ffn_mult: int = 4,
    ):
        super().__init__()
        self.n_special = n_special
        self.special = nn.Parameter(torch.zeros(n_special, dim))
        self.pos = nn.Parameter(torch.zeros(n_special + seq_len, dim))
        nn.init.normal_(self.special, std=0.02)
        nn.init.normal_(self.pos, std=0.02)
        self.blocks = nn.ModuleList(
            EncoderBlock(dim, n_heads, ffn_mult) for _ in range(n_layers)
        )
        self.ln = nn.LayerNorm(dim)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        b = tokens.shape[0]
        spec = self.special.unsqueeze(0).expand(b, -1, -1)
        x = torch.cat([spec, tokens], dim=1) + self.pos
        for blk in self.blocks:
            x = blk(x)
        return self.ln(x)


class ConvImageEmbedder(nn.Module):
    """Small trainable convolutional image embedder.

    Maps (b, 3, s, s) images to (b, dim) embeddings. A pretrained external
    encoder can be swapped in behind the same interface (`embed_dim`,
    `input_px`, forward); see ``teacher.build_image_embedder``.
    """

    def __init__(self, dim: int, input_px: int = 16):
        super().__init__()
        self.embed_dim = dim
        self.input_px = input_px
        self.net = nn.Sequential(
            nn.Conv2d(3, 32, 3, stride=2, padding=1),
            nn.GELU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.GELU(),
            nn.Conv2d(64, dim, 3, stride=2, padding=1),
            nn.GELU(),
        )
        self.out = nn.Linear(dim, dim)

    def forward(self, x):
        h = self.net(x).mean(dim=(-2, -1))
        return self.out(h)


def mlp_head(widths: list[int]) -> nn.Sequential:
    """Plain MLP: Linear(+GELU) chain over the given widths."""
    layers: list[nn.Module] = []
    for i in range(len(widths) - 1):
        layers.append(nn.Linear(widths[i], widths[i + 1]))
        if i < len(widths) - 2:
            layers.append(nn.GELU())
    return nn.Sequential(*layers)
