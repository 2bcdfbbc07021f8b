"""Small shared building blocks."""

from __future__ import annotations

import math

import torch
import torch.nn as nn


class Mlp(nn.Module):
    """Two-layer perceptron with ReLU, the workhorse transformation here."""

    def __init__(self, d_in: int, d_hidden: int, d_out: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(d_in, d_hidden),
            nn.ReLU(),
            nn.Linear(d_hidden, d_out),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


def sinusoidal_positions(length: int, d_model: int, *, dtype=torch.float64,
                         device=None) -> torch.Tensor:
    """Standard fixed sin/cos position table, shape [length, d_model]."""
    position = torch.arange(length, dtype=dtype, device=device).unsqueeze(1)
    half = torch.arange(0, d_model, 2, dtype=dtype, device=device)
    div = torch.exp(-half * (math.log(10000.0) / d_model))
    table = torch.zeros(length, d_model, dtype=dtype, device=device)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div[: d_model // 2])
    return table
