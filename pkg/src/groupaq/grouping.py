"""City-to-group assignment: the trainable soft matrix, the transforms between
city and group level, and the frozen K-means baseline."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .layers import Mlp


def soft_assignment(logits: torch.Tensor) -> torch.Tensor:
    """Row-stochastic assignment matrix from unconstrained logits."""
    return torch.softmax(logits, dim=-1)


def cities_to_groups(fused: torch.Tensor, assign: torch.Tensor) -> torch.Tensor:
    """Group representations as assignment-weighted sums of city representations.

    fused: [batch, n_cities, d]; assign: [n_cities, n_groups] -> [batch, n_groups, d].
    """
    return torch.einsum("ik,bid->bkd", assign, fused)


def groups_to_cities(assign: torch.Tensor, group_reps: torch.Tensor) -> torch.Tensor:
    """Per-city mixture of (updated) group representations: assign @ group_reps."""
    return torch.einsum("ik,bkd->bid", assign, group_reps)


class GroupAssignment(nn.Module):
    """Trainable assignment logits; rows of softmax(logits) sum to 1."""

    def __init__(self, n_cities: int, n_groups: int, init_std: float = 0.1):
        super().__init__()
        self.logits = nn.Parameter(torch.randn(n_cities, n_groups) * init_std)

    def forward(self) -> torch.Tensor:
        return soft_assignment(self.logits)


class LocationFuser(nn.Module):
    """Fuse city representations with normalized coordinates (an MLP).

    With use_location=False the coordinates are dropped from the input,
    which is the location-ablated variant.
    """

    def __init__(self, d_model: int, use_location: bool = True):
        super().__init__()
        self.use_location = use_location
        d_in = d_model + (2 if use_location else 0)
        self.mlp = Mlp(d_in, d_model, d_model)

    def forward(self, x: torch.Tensor, loc_norm: torch.Tensor) -> torch.Tensor:
        if self.use_location:
            loc = loc_norm.unsqueeze(0).expand(x.shape[0], -1, -1)
            x = torch.cat([x, loc], dim=-1)
        return self.mlp(x)


def normalize_locations(locations: np.ndarray) -> np.ndarray:
    """Min-max normalize (lon, lat) columns to [0, 1]; constant axes map to 0."""
    locations = np.asarray(locations, dtype=np.float64)
    lo = locations.min(axis=0)
    span = locations.max(axis=0) - lo
    span[span == 0.0] = 1.0
    return (locations - lo) / span


def kmeans_assignment(locations: np.ndarray, k: int, seed: int,
                      max_iter: int = 100, tol: float = 1e-6) -> np.ndarray:
    """Hard one-hot assignment from Lloyd's algorithm on normalized locations.

    Seeding picks the first centroid uniformly at random and subsequent ones
    with probability proportional to squared distance from the chosen set
    (k-means++). An emptied cluster is re-seeded at the point farthest from
    its currently assigned centroid. Returns a one-hot [n_cities, k] matrix
    meant to be frozen (excluded from the optimizer).
    """
    points = normalize_locations(locations)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n_cities, got k={k}, n={n}")
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, 2))
    centroids[0] = points[rng.integers(n)]
    for j in range(1, k):
        d2 = ((points[:, None, :] - centroids[None, :j, :]) ** 2).sum(-1).min(axis=1)
        if d2.sum() == 0.0:
            centroids[j] = points[rng.integers(n)]
        else:
            centroids[j] = points[rng.choice(n, p=d2 / d2.sum())]

    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(-1)
        labels = d2.argmin(axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centroids[j] = points[members].mean(axis=0)
            else:
                dist_to_own = d2[np.arange(n), labels]
                far = int(dist_to_own.argmax())
                new_centroids[j] = points[far]
                labels[far] = j
        shift = np.abs(new_centroids - centroids).max()
        centroids = new_centroids
        if shift < tol:
            break

    one_hot = np.zeros((n, k), dtype=np.float64)
    one_hot[np.arange(n), labels] = 1.0
    return one_hot
