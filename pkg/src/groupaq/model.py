"""Encoder-decoder forecaster assembly, training loss, and checkpointing.

The encoder turns each sample into updated city representations, a soft
city-to-group assignment, and learned group-correlation attributes. The
decoder repeats the grouping / two-level message-passing pipeline with its
own parameters, consuming the encoder's assignment without gradient and its
correlation attributes verbatim, and a per-city MLP head emits all forecast
horizons at once. Ablation variants reroute this pipeline; see
HierarchicalStage.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from .config import ConfigError, TrainConfig, config_from_dict
from .data import N_FEATURES, CityRecord, NormalizationStats
from .encoder import SequenceEncoder, TimeEmbedding
from .graphs import CityGraph, build_group_graph
from .grouping import (GroupAssignment, LocationFuser, cities_to_groups,
                       groups_to_cities, normalize_locations)
from .layers import Mlp
from .message_passing import (CityFuser, CityMessagePassing,
                              CorrelationEncoder, GroupMessagePassing)

CHECKPOINT_VERSION = 1

# Config fields that must match for a checkpoint to be loadable.
ARCHITECTURE_FIELDS = (
    "tau_in", "tau_out", "n_groups", "d_hidden", "d_edge", "gnn_layers",
    "attn_heads", "attn_blocks", "d_ff", "time_dims", "variant",
)


class CheckpointError(ValueError):
    """Checkpoint file is unreadable or inconsistent with the requested model."""


class HierarchicalStage(nn.Module):
    """Location fusion, group round trip, and city message passing.

    The encoder instantiates this with its own correlation encoder; the
    decoder reuses the encoder's correlations and so is built without one.
    The flat variant drops the whole group pathway and substitutes zeros for
    the group-based city representations.
    """

    def __init__(self, config: TrainConfig, group_path: bool, own_correlations: bool):
        super().__init__()
        d = config.d_hidden
        self.group_path = group_path
        if group_path:
            self.fuse_location = LocationFuser(
                d, use_location=config.variant != "no_loc")
            self.correlations = (
                CorrelationEncoder(d, config.d_time, config.d_edge, config.n_groups)
                if own_correlations else None)
            self.group_mp = GroupMessagePassing(d, config.d_edge, config.gnn_layers)
        else:
            self.fuse_location = None
            self.correlations = None
            self.group_mp = None
        self.city_fuse = CityFuser(d)
        self.city_mp = CityMessagePassing(d, config.gnn_layers)

    def forward(self, x, assign, loc_norm, time_vec, city_src, city_dst,
                city_attr, grp_src, grp_dst, corr=None):
        """Returns (updated city reps, correlation tensor actually used)."""
        if self.group_path:
            fused = self.fuse_location(x, loc_norm)
            group_reps = cities_to_groups(fused, assign)
            if corr is None:
                corr = self.correlations(group_reps, time_vec)
            updated_groups = self.group_mp(group_reps, grp_src, grp_dst, corr)
            group_based = groups_to_cities(assign, updated_groups)
        else:
            group_based = torch.zeros_like(x)
        fused_cities = self.city_fuse(x, group_based)
        out = self.city_mp(fused_cities, city_src, city_dst, city_attr)
        return out, corr


class Forecaster(nn.Module):
    """Multi-horizon AQI forecaster over a fixed set of cities."""

    def __init__(self, config: TrainConfig, n_cities: int, locations: np.ndarray,
                 city_graph: CityGraph):
        super().__init__()
        locations = np.asarray(locations, dtype=np.float64)
        if locations.shape != (n_cities, 2):
            raise ConfigError(
                f"locations must be [{n_cities}, 2], got {locations.shape}")
        if city_graph.n_nodes != n_cities:
            raise ConfigError(
                f"city graph has {city_graph.n_nodes} nodes for {n_cities} cities")
        self.config = config
        self.n_cities = n_cities

        self.register_buffer("loc_norm",
                             torch.from_numpy(normalize_locations(locations)),
                             persistent=False)
        self.register_buffer("city_src",
                             torch.from_numpy(city_graph.edge_index[0].copy()),
                             persistent=False)
        self.register_buffer("city_dst",
                             torch.from_numpy(city_graph.edge_index[1].copy()),
                             persistent=False)
        self.register_buffer("city_attr",
                             torch.from_numpy(city_graph.edge_weight.copy()).reshape(-1, 1),
                             persistent=False)
        group_graph = build_group_graph(config.n_groups, config.d_edge)
        self.register_buffer("grp_src", torch.from_numpy(group_graph.edge_index[0].copy()),
                             persistent=False)
        self.register_buffer("grp_dst", torch.from_numpy(group_graph.edge_index[1].copy()),
                             persistent=False)

        self.seq_encoder = SequenceEncoder(
            N_FEATURES, config.d_hidden, n_heads=config.attn_heads,
            n_blocks=config.attn_blocks, d_ff=config.d_ff)
        self.time_embed = TimeEmbedding(config.time_dims)
        if config.variant == "kmeans":
            self.assignment = None
            self.register_buffer(
                "fixed_assignment",
                torch.zeros(n_cities, config.n_groups, dtype=torch.float64))
        else:
            self.assignment = GroupAssignment(n_cities, config.n_groups)
        group_path = config.variant != "fga"
        own_corr = config.variant not in ("fga", "no_ce")
        self.encoder_stage = HierarchicalStage(config, group_path, own_corr)
        self.decoder_stage = HierarchicalStage(config, group_path, own_correlations=False)
        self.head = Mlp(config.d_hidden, config.d_hidden, config.tau_out)
        self.double()

    # -- assignment -------------------------------------------------------

    def set_fixed_assignment(self, one_hot: np.ndarray) -> None:
        expected = (self.n_cities, self.config.n_groups)
        if one_hot.shape != expected:
            raise ConfigError(f"fixed assignment must be {expected}, got {one_hot.shape}")
        with torch.no_grad():
            self.fixed_assignment.copy_(torch.from_numpy(np.asarray(one_hot, dtype=np.float64)))

    def assignment_matrix(self) -> torch.Tensor:
        if self.assignment is None:
            return self.fixed_assignment
        return self.assignment()

    # -- forward pipeline ---------------------------------------------------

    def _stage_args(self):
        return (self.loc_norm, self.city_src, self.city_dst, self.city_attr,
                self.grp_src, self.grp_dst)

    def encode(self, history: torch.Tensor, time_idx: torch.Tensor):
        """History + anchor time -> (city reps, assignment, correlations)."""
        x = self.seq_encoder(history)
        time_vec = self.time_embed(time_idx)
        assign = self.assignment_matrix()
        corr_in = None
        if self.config.variant == "no_ce":
            corr_in = x.new_zeros(x.shape[0], self.config.n_groups,
                                  self.config.n_groups, self.config.d_edge)
        loc_norm, *rest = self._stage_args()
        out, corr = self.encoder_stage(x, assign, loc_norm, time_vec, *rest,
                                       corr=corr_in)
        return out, assign, corr

    def decode(self, encoded: torch.Tensor, assign: torch.Tensor,
               corr: torch.Tensor) -> torch.Tensor:
        """Rerun the grouping pipeline from the encoder output.

        The assignment is consumed without gradient; correlations are reused
        verbatim rather than re-encoded.
        """
        frozen = assign.detach() if assign is not None else None
        loc_norm, *rest = self._stage_args()
        out, _ = self.decoder_stage(encoded, frozen, loc_norm, None, *rest,
                                    corr=corr)
        return out

    def forward(self, history: torch.Tensor, time_idx: torch.Tensor) -> torch.Tensor:
        """Normalized-space forecasts [batch, n_cities, tau_out]."""
        encoded, assign, corr = self.encode(history, time_idx)
        decoded = self.decode(encoded, assign, corr)
        return self.head(decoded)

    # -- optimizer plumbing -------------------------------------------------

    def parameter_partition(self):
        """(assignment logits, everything else); each parameter in exactly one."""
        logit_params = [] if self.assignment is None else list(self.assignment.parameters())
        logit_ids = {id(p) for p in logit_params}
        base_params = [p for p in self.parameters() if id(p) not in logit_ids]
        return logit_params, base_params


def mae_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over every prediction element."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    return (pred - target).abs().mean()


# ---------------------------------------------------------------------------
# Checkpointing

def save_checkpoint(model: Forecaster, stats: NormalizationStats,
                    cities: list[CityRecord], city_graph: CityGraph,
                    path) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "n_cities": model.n_cities,
        "cities": [(c.city_id, c.name, c.longitude, c.latitude) for c in cities],
        "city_edge_index": city_graph.edge_index,
        "city_edge_weight": city_graph.edge_weight,
        "normalization": stats.to_dict(),
        "state_dict": model.state_dict(),
    }
    torch.save(payload, path)


def load_checkpoint(path, expected_config: TrainConfig | None = None):
    """Rebuild (model, stats, cities, city_graph) from a checkpoint file."""
    try:
        payload = torch.load(path, weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version} unsupported "
            f"(expected {CHECKPOINT_VERSION})")
    config = config_from_dict(payload["config"])
    if expected_config is not None:
        for name in ARCHITECTURE_FIELDS:
            have = getattr(config, name)
            want = getattr(expected_config, name)
            if have != want:
                raise CheckpointError(
                    f"checkpoint {name}={have!r} does not match requested {want!r}")
    cities = [CityRecord(int(i), str(n), float(lon), float(lat))
              for i, n, lon, lat in payload["cities"]]
    locations = np.array([[c.longitude, c.latitude] for c in cities])
    city_graph = CityGraph(n_nodes=payload["n_cities"],
                           edge_index=np.asarray(payload["city_edge_index"]),
                           edge_weight=np.asarray(payload["city_edge_weight"]))
    model = Forecaster(config, payload["n_cities"], locations, city_graph)
    model.load_state_dict(payload["state_dict"])
    stats = NormalizationStats.from_dict(payload["normalization"])
    return model, stats, cities, city_graph
