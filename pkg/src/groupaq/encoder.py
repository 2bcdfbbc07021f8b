"""Per-city sequence feature extraction and calendar-time embedding.

Each city's 24-hour history is encoded independently (cities share weights)
by a small post-norm transformer block stack: input projection plus fixed
sinusoidal positions, multi-head scaled dot-product self-attention with
residual + layer norm, a position-wise feed-forward with residual + layer
norm, then mean pooling over time.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .layers import sinusoidal_positions

LAYERNORM_EPS = 1e-12


def scaled_dot_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor
                         ) -> tuple[torch.Tensor, torch.Tensor]:
    """softmax(Q K^T / sqrt(d_key)) V.

    q, k, v: [..., length, d_key]. Returns (output, weights); each weights
    row is a probability distribution over key positions.
    """
    d_key = q.shape[-1]
    scores = q @ k.transpose(-2, -1) / (d_key ** 0.5)
    weights = torch.softmax(scores, dim=-1)
    return weights @ v, weights


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads != 0:
            raise ValueError("n_heads must divide d_model")
        self.n_heads = n_heads
        self.d_key = d_model // n_heads
        self.query = nn.Linear(d_model, d_model)
        self.key = nn.Linear(d_model, d_model)
        self.value = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        b, length, _ = x.shape
        return x.view(b, length, self.n_heads, self.d_key).transpose(1, 2)

    def forward(self, x: torch.Tensor, return_weights: bool = False):
        q, k, v = self._split(self.query(x)), self._split(self.key(x)), self._split(self.value(x))
        ctx, weights = scaled_dot_attention(q, k, v)
        b, _, length, _ = ctx.shape
        merged = ctx.transpose(1, 2).reshape(b, length, self.n_heads * self.d_key)
        out = self.out(merged)
        if return_weights:
            return out, weights
        return out


class EncoderBlock(nn.Module):
    """Post-norm transformer block: attention and feed-forward sublayers."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.attn = MultiHeadSelfAttention(d_model, n_heads)
        self.norm_attn = nn.LayerNorm(d_model, eps=LAYERNORM_EPS)
        self.ffn = nn.Sequential(
            nn.Linear(d_model, d_ff), nn.ReLU(), nn.Linear(d_ff, d_model))
        self.norm_ffn = nn.LayerNorm(d_model, eps=LAYERNORM_EPS)

    def forward(self, x: torch.Tensor, return_weights: bool = False):
        if return_weights:
            attn_out, weights = self.attn(x, return_weights=True)
        else:
            attn_out, weights = self.attn(x), None
        x = self.norm_attn(x + attn_out)
        x = self.norm_ffn(x + self.ffn(x))
        if return_weights:
            return x, weights
        return x


class SequenceEncoder(nn.Module):
    """History [batch, city, hours, features] -> city representations [batch, city, d_model]."""

    def __init__(self, n_features: int, d_model: int, n_heads: int = 4,
                 n_blocks: int = 1, d_ff: int = 64):
        super().__init__()
        self.d_model = d_model
        self.in_proj = nn.Linear(n_features, d_model)
        self.blocks = nn.ModuleList(
            EncoderBlock(d_model, n_heads, d_ff) for _ in range(n_blocks))

    def forward(self, history: torch.Tensor, return_weights: bool = False):
        if not torch.isfinite(history).all():
            raise ValueError("history contains non-finite values")
        b, n_cities, length, n_feat = history.shape
        x = self.in_proj(history.reshape(b * n_cities, length, n_feat))
        x = x + sinusoidal_positions(length, self.d_model, dtype=x.dtype,
                                     device=x.device)
        weights = None
        for i, block in enumerate(self.blocks):
            if return_weights and i == 0:
                x, weights = block(x, return_weights=True)
            else:
                x = block(x)
        pooled = x.mean(dim=1).reshape(b, n_cities, self.d_model)
        if return_weights:
            return pooled, weights
        return pooled


class TimeEmbedding(nn.Module):
    """Learned month/day-of-week/hour embeddings, concatenated."""

    SIZES = (12, 7, 24)

    def __init__(self, dims: tuple[int, int, int] = (4, 4, 4)):
        super().__init__()
        self.month = nn.Embedding(12, dims[0])
        self.day_of_week = nn.Embedding(7, dims[1])
        self.hour = nn.Embedding(24, dims[2])
        self.d_out = sum(dims)

    def forward(self, time_idx: torch.Tensor) -> torch.Tensor:
        """time_idx: [batch, 3] integer (month, day-of-week, hour) indices."""
        for col, size in enumerate(self.SIZES):
            vals = time_idx[:, col]
            if (vals < 0).any() or (vals >= size).any():
                raise ValueError(
                    f"time index column {col} out of range [0, {size})")
        return torch.cat([
            self.month(time_idx[:, 0]),
            self.day_of_week(time_idx[:, 1]),
            self.hour(time_idx[:, 2]),
        ], dim=-1)
