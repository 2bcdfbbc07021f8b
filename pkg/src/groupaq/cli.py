"""Command-line interface: synthesize data, train, evaluate, sweep group
counts, run ablations, export groupings, and forecast from a checkpoint."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from .config import VARIANTS, ConfigError, TrainConfig, config_from_dict, load_config
from .data import IngestionError, load_panel, write_synthetic_dataset
from .model import CheckpointError, load_checkpoint, save_checkpoint
from .training import (TrainingError, evaluate, export_grouping, forecast_at,
                       prepare_data, sweep_groups, train, write_metrics_csv,
                       write_sweep_csv)


def _info(message: str) -> None:
    print(message, file=sys.stderr)


def _resolve_config(args) -> TrainConfig:
    overrides = {}
    for flag in ("seed", "variant", "epochs", "n_groups", "batch_size",
                 "lr_base", "lr_logits"):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[flag] = value
    if getattr(args, "config", None):
        return load_config(args.config, overrides)
    return config_from_dict(overrides)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_values(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v]


def _parse_timestamp(text: str) -> datetime:
    try:
        stamp = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ValueError(f"cannot parse timestamp {text!r}; use ISO-8601") from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp


# ---------------------------------------------------------------------------
# Subcommands

def cmd_synth(args) -> int:
    if args.groups < 1 or args.cities < args.groups:
        raise ValueError("need --cities >= --groups >= 1")
    if args.hours < 1:
        raise ValueError("--hours must be positive")
    out = _out_dir(args)
    write_synthetic_dataset(out, args.cities, args.groups, args.hours,
                            args.seed, missing_rate=args.missing_rate)
    _info(f"wrote cities.csv, observations.csv, groups_true.csv to {out}")
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    out = _out_dir(args)
    cities, panel = load_panel(args.data_dir)
    bundle = prepare_data(cities, panel, config)
    _info(f"training variant={config.variant} n_groups={config.n_groups} "
          f"epochs={config.epochs} on {len(cities)} cities "
          f"({len(bundle.train)}/{len(bundle.val)}/{len(bundle.test)} samples)")
    result = train(config, bundle, log_path=out / "training_log.jsonl")
    save_checkpoint(result.model, bundle.stats, cities, bundle.city_graph,
                    out / "checkpoint.pt")
    rows = []
    for split_name, samples in (("train", bundle.train), ("val", bundle.val),
                                ("test", bundle.test)):
        rows += evaluate(result.model, samples, bundle.stats,
                         batch_size=config.batch_size, variant=config.variant,
                         split=split_name, seed=config.seed)
    write_metrics_csv(rows, out / "metrics.csv")
    _info(f"best epoch {result.best_epoch} val MAE {result.best_val_mae:.4f}; "
          f"artifacts in {out}")
    print((out / "metrics.csv").read_text(), end="")
    return 0


def cmd_eval(args) -> int:
    model, stats, ckpt_cities, _ = load_checkpoint(args.checkpoint)
    cities, panel = load_panel(args.data_dir)
    if len(cities) != model.n_cities:
        raise ValueError(
            f"checkpoint was trained on {model.n_cities} cities but data dir "
            f"has {len(cities)}")
    config = model.config
    from .data import chronological_split, make_windows
    samples = make_windows(panel, config.tau_in, config.tau_out, config.window_step)
    splits = dict(zip(("train", "val", "test"), chronological_split(samples)))
    rows = evaluate(model, splits[args.split], stats,
                    batch_size=config.batch_size, variant=config.variant,
                    split=args.split, seed=config.seed)
    out = _out_dir(args)
    write_metrics_csv(rows, out / "metrics.csv")
    print((out / "metrics.csv").read_text(), end="")
    return 0


def cmd_forecast(args) -> int:
    model, stats, _, _ = load_checkpoint(args.checkpoint)
    cities, panel = load_panel(args.data_dir)
    if len(cities) != model.n_cities:
        raise ValueError(
            f"checkpoint was trained on {model.n_cities} cities but data dir "
            f"has {len(cities)}")
    anchor = _parse_timestamp(args.at)
    pred = forecast_at(model, stats, panel, anchor)
    out = _out_dir(args)
    path = out / "forecast.csv"
    with open(path, "w") as fh:
        fh.write("city_id,horizon,aqi_pred\n")
        for c in range(pred.shape[0]):
            for h in range(pred.shape[1]):
                fh.write(f"{c},{h + 1},{pred[c, h]:.4f}\n")
    _info(f"wrote {path}")
    return 0


def _sweep_job(payload: dict) -> dict:
    """Worker for --jobs > 1; reloads data so jobs stay independent."""
    config = config_from_dict(payload["config"])
    cities, panel = load_panel(payload["data_dir"])
    bundle = prepare_data(cities, panel, config)
    rows = sweep_groups(config, bundle, [payload["value"]], seeds=[payload["seed"]])
    return rows[0]


def cmd_sweep(args) -> int:
    config = _resolve_config(args)
    values = _parse_values(args.values)
    if not values or any(v < 1 for v in values):
        raise ValueError(f"--values must name group counts >= 1, got {values}")
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [config.seed]
    out = _out_dir(args)
    if args.jobs > 1:
        payloads = [{"config": config.to_dict(), "data_dir": args.data_dir,
                     "value": v, "seed": s} for v in values for s in seeds]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_job, payloads))
    else:
        cities, panel = load_panel(args.data_dir)
        bundle = prepare_data(cities, panel, config)
        rows = sweep_groups(config, bundle, values, seeds=seeds)
    rows.sort(key=lambda r: (r["n_group"], r["seed"]))
    write_sweep_csv(rows, out / "sweep.csv")
    import numpy as np
    for value in values:
        maes = [r["val_mae"] for r in rows if r["n_group"] == value]
        print(f"n_group={value} val_mae={np.mean(maes):.4f} +/- {np.std(maes):.4f}")
    return 0


def cmd_export_grouping(args) -> int:
    model, _, cities, _ = load_checkpoint(args.checkpoint)
    out = _out_dir(args)
    export_grouping(model, cities, out / "grouping.csv", out / "grouping.geojson")
    _info(f"wrote grouping.csv and grouping.geojson to {out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groupaq",
        description="Hierarchical city-group graph forecaster for hourly AQI.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--cities", type=int, required=True)
    p.add_argument("--groups", type=int, required=True)
    p.add_argument("--hours", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--missing-rate", type=float, default=0.0,
                   help="fraction of cells to blank out (filled on ingestion)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--variant", choices=VARIANTS, default=None)
        p.add_argument("--epochs", type=int, default=None)
        p.add_argument("--n-groups", dest="n_groups", type=int, default=None)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        p.add_argument("--lr-base", dest="lr_base", type=float, default=None)
        p.add_argument("--lr-logits", dest="lr_logits", type=float, default=None)

    p = sub.add_parser("train", help="train a forecaster on a data directory")
    add_config_flags(p)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--split", choices=["train", "val", "test"], default="test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("forecast", help="forecast the hours after an anchor time")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--at", required=True, help="ISO-8601 anchor timestamp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("sweep", help="train across group counts, report val MAE")
    add_config_flags(p)
    p.add_argument("--values", required=True,
                   help="group counts: '10..18' or '3,5,7'")
    p.add_argument("--seeds", default=None, help="comma-separated seeds")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-grouping",
                       help="write argmax groups + probabilities for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_grouping)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IngestionError, CheckpointError, TrainingError,
            FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
