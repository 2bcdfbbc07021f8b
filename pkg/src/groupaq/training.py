"""Training loop with dual learning rates, per-horizon evaluation, the group
count sweep, the ablation harness, and grouping export."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig
from .data import (CityRecord, NormalizationStats, ObservationPanel,
                   WindowedSample, apply_normalization, chronological_split,
                   fit_normalization, make_windows)
from .graphs import CityGraph, build_city_graph
from .grouping import kmeans_assignment
from .model import Forecaster, mae_loss

METRICS_COLUMNS = ("variant", "split", "horizon", "mae", "rmse", "seed")


class TrainingError(RuntimeError):
    """Training aborted (non-finite loss or invalid setup)."""


@dataclass
class DataBundle:
    """Everything a training run needs, derived once from a panel."""

    cities: list[CityRecord]
    panel: ObservationPanel
    locations: np.ndarray
    city_graph: CityGraph
    train: list[WindowedSample]
    val: list[WindowedSample]
    test: list[WindowedSample]
    stats: NormalizationStats


@dataclass
class TrainResult:
    model: Forecaster
    stats: NormalizationStats
    config: TrainConfig
    history: list[dict]
    best_epoch: int
    best_val_mae: float


def prepare_data(cities: list[CityRecord], panel: ObservationPanel,
                 config: TrainConfig) -> DataBundle:
    """Windows, chronological split, train-split normalization, city graph."""
    locations = np.array([[c.longitude, c.latitude] for c in cities])
    graph = build_city_graph(locations, config.radius_km, distance=config.distance)
    samples = make_windows(panel, config.tau_in, config.tau_out, config.window_step)
    train, val, test = chronological_split(samples)
    stats = fit_normalization(train)
    return DataBundle(cities=cities, panel=panel, locations=locations,
                      city_graph=graph, train=train, val=val, test=test,
                      stats=stats)


def build_model(config: TrainConfig, bundle: DataBundle) -> Forecaster:
    """Seeded model construction; the K-means variant freezes its assignment here."""
    torch.manual_seed(config.seed)
    model = Forecaster(config, len(bundle.cities), bundle.locations, bundle.city_graph)
    if config.variant == "kmeans":
        model.set_fixed_assignment(
            kmeans_assignment(bundle.locations, config.n_groups, config.seed))
    return model


def _stack_split(samples: list[WindowedSample], stats: NormalizationStats):
    """Materialize a split as tensors: normalized history, raw + normalized
    targets, and calendar indices."""
    hist = np.stack([apply_normalization(s, stats).history for s in samples])
    target_raw = np.stack([s.target for s in samples])
    time_idx = np.array([s.time_features.as_tuple() for s in samples], dtype=np.int64)
    return (torch.from_numpy(hist),
            torch.from_numpy(target_raw),
            torch.from_numpy(stats.normalize_aqi(target_raw)),
            torch.from_numpy(time_idx))


def _max_grad_norm(model: Forecaster) -> float:
    norms = [p.grad.abs().max().item() for p in model.parameters() if p.grad is not None]
    return max(norms) if norms else 0.0


def train(config: TrainConfig, bundle: DataBundle, log_path=None,
          on_step=None) -> TrainResult:
    """Run the full optimization and return the best-validation model.

    Adam with two parameter groups: assignment logits at config.lr_logits and
    everything else at config.lr_base. Mini-batches are reshuffled each epoch
    from a seeded generator; validation MAE (raw AQI units) is computed per
    epoch and the state with the lowest value is restored at the end.
    Deterministic for a fixed seed (single-threaded).
    """
    torch.set_num_threads(1)
    model = build_model(config, bundle)
    logit_params, base_params = model.parameter_partition()
    param_groups = [{"params": base_params, "lr": config.lr_base}]
    if logit_params:
        param_groups.append({"params": logit_params, "lr": config.lr_logits})
    optimizer = torch.optim.Adam(param_groups, betas=(0.9, 0.999), eps=1e-8)

    hist, _, target_norm, time_idx = _stack_split(bundle.train, bundle.stats)
    val_arrays = _stack_split(bundle.val, bundle.stats)
    n_samples = hist.shape[0]
    rng = np.random.default_rng(config.seed)

    log_fh = open(log_path, "w") if log_path is not None else None
    history: list[dict] = []
    best_val = math.inf
    best_epoch = -1
    best_state = None
    try:
        for epoch in range(config.epochs):
            model.train()
            perm = rng.permutation(n_samples)
            batch_losses = []
            for step, start in enumerate(range(0, n_samples, config.batch_size)):
                idx = torch.from_numpy(perm[start:start + config.batch_size])
                pred = model(hist[idx], time_idx[idx])
                loss = mae_loss(pred, target_norm[idx])
                if not torch.isfinite(loss):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch} batch {step} "
                        f"(max gradient norm {_max_grad_norm(model):.4g})")
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                batch_losses.append(loss.item())
                if on_step is not None:
                    on_step(model, epoch, step)
            val_mae, val_rmse = _split_error(model, val_arrays, bundle.stats,
                                             config.batch_size)
            record = {"epoch": epoch,
                      "train_loss": float(np.mean(batch_losses)),
                      "val_mae": val_mae, "val_rmse": val_rmse}
            history.append(record)
            if log_fh is not None:
                log_fh.write(json.dumps(record) + "\n")
            if val_mae < best_val:
                best_val = val_mae
                best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())
    finally:
        if log_fh is not None:
            log_fh.close()
    if best_state is not None:
        model.load_state_dict(best_state)
    return TrainResult(model=model, stats=bundle.stats, config=config,
                       history=history, best_epoch=best_epoch,
                       best_val_mae=best_val)


# ---------------------------------------------------------------------------
# Evaluation

def _accumulate_errors(model: Forecaster, arrays, stats: NormalizationStats,
                       batch_size: int):
    """Per-horizon sums of |err| and err^2 in raw AQI units."""
    hist, target_raw, _, time_idx = arrays
    if hist.shape[0] == 0:
        raise ValueError("cannot evaluate an empty split")
    tau_out = target_raw.shape[-1]
    abs_sum = np.zeros(tau_out)
    sq_sum = np.zeros(tau_out)
    count = 0
    model.eval()
    with torch.no_grad():
        for start in range(0, hist.shape[0], batch_size):
            sl = slice(start, start + batch_size)
            pred_raw = stats.denormalize_aqi(model(hist[sl], time_idx[sl]).numpy())
            err = pred_raw - target_raw[sl].numpy()
            abs_sum += np.abs(err).sum(axis=(0, 1))
            sq_sum += (err ** 2).sum(axis=(0, 1))
            count += err.shape[0] * err.shape[1]
    return abs_sum, sq_sum, count


def _split_error(model, arrays, stats, batch_size) -> tuple[float, float]:
    abs_sum, sq_sum, count = _accumulate_errors(model, arrays, stats, batch_size)
    return (float(abs_sum.sum() / (count * len(abs_sum))),
            float(np.sqrt(sq_sum.sum() / (count * len(sq_sum)))))


def evaluate(model: Forecaster, samples: list[WindowedSample],
             stats: NormalizationStats, batch_size: int = 256,
             variant: str = "full", split: str = "test",
             seed: int = 0) -> list[dict]:
    """Per-horizon MAE and RMSE rows in raw AQI units."""
    if not samples:
        raise ValueError("cannot evaluate an empty split")
    arrays = _stack_split(samples, stats)
    abs_sum, sq_sum, count = _accumulate_errors(model, arrays, stats, batch_size)
    rows = []
    for h in range(len(abs_sum)):
        rows.append({
            "variant": variant, "split": split, "horizon": h + 1,
            "mae": float(abs_sum[h] / count),
            "rmse": float(np.sqrt(sq_sum[h] / count)),
            "seed": seed,
        })
    return rows


def write_metrics_csv(rows: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for r in rows:
            fh.write(f"{r['variant']},{r['split']},{r['horizon']},"
                     f"{r['mae']:.6f},{r['rmse']:.6f},{r['seed']}\n")


def forecast_at(model: Forecaster, stats: NormalizationStats,
                panel: ObservationPanel, anchor_time: datetime) -> np.ndarray:
    """Raw AQI forecasts [n_cities, tau_out] for the hours after anchor_time."""
    tau_in = model.config.tau_in
    idx = panel.index_of(anchor_time)
    if idx < tau_in - 1 or idx >= panel.hours:
        raise ValueError(
            f"anchor {anchor_time} needs {tau_in} hours of history inside the panel")
    history = stats.normalize(panel.data[:, idx - tau_in + 1: idx + 1, :])
    from .data import time_features
    tidx = np.array([time_features(panel.timestamp_at(idx)).as_tuple()],
                    dtype=np.int64)
    model.eval()
    with torch.no_grad():
        pred = model(torch.from_numpy(history).unsqueeze(0),
                     torch.from_numpy(tidx))
    return stats.denormalize_aqi(pred[0].numpy())


# ---------------------------------------------------------------------------
# Sweeps and ablations

def sweep_groups(config: TrainConfig, bundle: DataBundle, values,
                 seeds=None) -> list[dict]:
    """Train one model per group count (x seed) and report validation MAE."""
    seeds = [config.seed] if seeds is None else list(seeds)
    rows = []
    for value in values:
        if value < 1:
            raise ValueError(f"group count must be >= 1, got {value}")
        for seed in seeds:
            run_cfg = config.replace(n_groups=int(value), seed=int(seed))
            result = train(run_cfg, bundle)
            rows.append({"n_group": int(value), "val_mae": result.best_val_mae,
                         "seed": int(seed)})
    return rows


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write("n_group,val_mae,seed\n")
        for r in rows:
            fh.write(f"{r['n_group']},{r['val_mae']:.6f},{r['seed']}\n")


def run_ablation(variant: str, config: TrainConfig, bundle: DataBundle
                 ) -> tuple[TrainResult, list[dict]]:
    """Train the named variant and evaluate it on the test split."""
    run_cfg = config.replace(variant=variant)  # validates the name
    result = train(run_cfg, bundle)
    rows = evaluate(result.model, bundle.test, bundle.stats,
                    batch_size=run_cfg.batch_size, variant=variant,
                    split="test", seed=run_cfg.seed)
    return result, rows


# ---------------------------------------------------------------------------
# Grouping export and agreement scoring

def export_grouping(model: Forecaster, cities: list[CityRecord],
                    csv_path, geojson_path) -> None:
    """Write per-city argmax group and full probability rows (CSV + GeoJSON)."""
    probs = model.assignment_matrix().detach().numpy()
    n_groups = probs.shape[1]
    argmax = probs.argmax(axis=1)
    with open(csv_path, "w") as fh:
        headers = ["city_id", "lon", "lat", "group_argmax"] + [
            f"p_{k}" for k in range(n_groups)]
        fh.write(",".join(headers) + "\n")
        for c in cities:
            row = [str(c.city_id), f"{c.longitude:.6f}", f"{c.latitude:.6f}",
                   str(int(argmax[c.city_id]))]
            row += [f"{p:.6f}" for p in probs[c.city_id]]
            fh.write(",".join(row) + "\n")
    features = []
    for c in cities:
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point",
                         "coordinates": [c.longitude, c.latitude]},
            "properties": {"city_id": c.city_id, "name": c.name,
                           "group": int(argmax[c.city_id])},
        })
    collection = {"type": "FeatureCollection", "features": features}
    with open(geojson_path, "w") as fh:
        json.dump(collection, fh)


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Permutation-invariant agreement between two hard labelings.

    1.0 for identical partitions, ~0 for independent random ones.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be 1-D and the same length")
    n = a.size
    _, a_idx = np.unique(a, return_inverse=True)
    _, b_idx = np.unique(b, return_inverse=True)
    contingency = np.zeros((a_idx.max() + 1, b_idx.max() + 1))
    np.add.at(contingency, (a_idx, b_idx), 1.0)

    def comb2(x):
        return x * (x - 1.0) / 2.0

    sum_cells = comb2(contingency).sum()
    sum_rows = comb2(contingency.sum(axis=1)).sum()
    sum_cols = comb2(contingency.sum(axis=0)).sum()
    expected = sum_rows * sum_cols / comb2(n)
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
