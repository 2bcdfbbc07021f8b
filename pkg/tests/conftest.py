import numpy as np
import pytest
import torch

from groupaq.config import TrainConfig
from groupaq.data import N_FEATURES
from groupaq.graphs import build_city_graph
from groupaq.model import Forecaster

# Two well-separated clusters of two cities each; intra-cluster links only
# at the default 250 km radius.
TINY_LOCATIONS = np.array([
    [110.0, 33.0],
    [110.5, 33.3],
    [118.0, 40.0],
    [118.4, 40.2],
])


def tiny_config(**overrides) -> TrainConfig:
    base = dict(n_groups=2, d_hidden=8, attn_heads=2, attn_blocks=1, d_ff=12,
                d_edge=4, time_dims=(2, 2, 2), gnn_layers=2, tau_in=4,
                tau_out=3, epochs=2, batch_size=4, seed=7)
    base.update(overrides)
    return TrainConfig(**base)


def make_tiny_model(variant: str = "full", seed: int = 7, **overrides) -> Forecaster:
    cfg = tiny_config(variant=variant, **overrides)
    graph = build_city_graph(TINY_LOCATIONS, cfg.radius_km)
    torch.manual_seed(seed)
    return Forecaster(cfg, len(TINY_LOCATIONS), TINY_LOCATIONS, graph)


def rand_inputs(cfg: TrainConfig, n_cities: int, batch: int, seed: int = 0):
    """Random (history, time_idx, target_norm) tensors for a model."""
    gen = torch.Generator().manual_seed(seed)
    history = torch.randn(batch, n_cities, cfg.tau_in, N_FEATURES,
                          generator=gen, dtype=torch.float64)
    time_idx = torch.stack([
        torch.randint(0, 12, (batch,), generator=gen),
        torch.randint(0, 7, (batch,), generator=gen),
        torch.randint(0, 24, (batch,), generator=gen),
    ], dim=1)
    target = torch.randn(batch, n_cities, cfg.tau_out,
                         generator=gen, dtype=torch.float64)
    return history, time_idx, target


@pytest.fixture
def tiny_model() -> Forecaster:
    return make_tiny_model()


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-12)


def check_gradients_against_fd(model, loss_fn, eps=1e-4, rtol=1e-3,
                               coords_per_tensor=4, seed=0,
                               name_filter=None):
    """Compare autograd gradients with central finite differences.

    loss_fn() must recompute the scalar loss from scratch. A sample of
    coordinates is checked in every named parameter tensor (all coordinates
    when the tensor is small). Returns the number of coordinates checked.
    """
    rng = np.random.default_rng(seed)
    model.zero_grad()
    loss_fn().backward()
    checked = 0
    for name, param in model.named_parameters():
        if name_filter is not None and not name_filter(name):
            continue
        grad = param.grad
        flat = param.data.view(-1)
        n = flat.numel()
        if n <= coords_per_tensor:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=coords_per_tensor, replace=False)
        for idx in coords:
            idx = int(idx)
            orig = flat[idx].item()
            with torch.no_grad():
                flat[idx] = orig + eps
                up = loss_fn().item()
                flat[idx] = orig - eps
                down = loss_fn().item()
                flat[idx] = orig
            fd = (up - down) / (2 * eps)
            ad = 0.0 if grad is None else grad.view(-1)[idx].item()
            if abs(ad) < 1e-10 and abs(fd) < 1e-7:
                checked += 1
                continue
            rel = relative_error(ad, fd)
            assert rel < rtol, (
                f"{name}[{idx}]: autograd {ad:.6g} vs finite-diff {fd:.6g} "
                f"(relative error {rel:.3g})")
            checked += 1
    return checked
