"""Learned inter-group correlation attributes and message passing on the
group graph and the city graph.

Messages on both graphs follow the same scheme: for each directed edge
source -> destination, an MLP maps [dest_rep, source_rep, edge_attr] to a
message; messages are sum-aggregated per destination (an empty neighborhood
aggregates to zero) and an update MLP combines the aggregate with the node's
own representation. Layers are stacked with fresh parameters; edge
attributes stay fixed across layers.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .layers import Mlp


class CorrelationEncoder(nn.Module):
    """Nonnegative learned edge attributes for every ordered group pair.

    For pair (a, b), a != b: attr = ReLU(MLP([rep_a, rep_b, time_vector])).
    Output is a dense [batch, n_groups, n_groups, d_edge] tensor with a zero
    diagonal; entry [a, b] belongs to the edge from group a to group b.
    """

    def __init__(self, d_model: int, d_time: int, d_edge: int, n_groups: int):
        super().__init__()
        self.n_groups = n_groups
        self.d_edge = d_edge
        self.mlp = Mlp(2 * d_model + d_time, d_model, d_edge)
        off_diag = ~torch.eye(n_groups, dtype=torch.bool)
        src, dst = torch.nonzero(off_diag, as_tuple=True)
        self.register_buffer("pair_src", src, persistent=False)
        self.register_buffer("pair_dst", dst, persistent=False)

    def forward(self, group_reps: torch.Tensor, time_vec: torch.Tensor) -> torch.Tensor:
        b, k, _ = group_reps.shape
        n_pairs = self.pair_src.numel()
        rep_a = group_reps[:, self.pair_src]
        rep_b = group_reps[:, self.pair_dst]
        time = time_vec.unsqueeze(1).expand(-1, n_pairs, -1)
        attrs = torch.relu(self.mlp(torch.cat([rep_a, rep_b, time], dim=-1)))
        dense = group_reps.new_zeros(b, k, k, self.d_edge)
        dense[:, self.pair_src, self.pair_dst] = attrs
        return dense


class MessagePassingLayer(nn.Module):
    """One message + aggregate + update round on a directed edge list."""

    def __init__(self, d_model: int, d_attr: int, update_order: str):
        super().__init__()
        if update_order not in ("node_first", "agg_first"):
            raise ValueError(f"bad update_order {update_order!r}")
        self.update_order = update_order
        self.message = Mlp(2 * d_model + d_attr, d_model, d_model)
        self.update = Mlp(2 * d_model, d_model, d_model)

    def forward(self, x: torch.Tensor, src: torch.Tensor, dst: torch.Tensor,
                attr: torch.Tensor) -> torch.Tensor:
        b, n, d = x.shape
        if attr.dim() == 2:
            attr = attr.unsqueeze(0).expand(b, -1, -1)
        msgs = self.message(torch.cat([x[:, dst], x[:, src], attr], dim=-1))
        agg = x.new_zeros(b, n, d).index_add(1, dst, msgs)
        if self.update_order == "agg_first":
            return self.update(torch.cat([agg, x], dim=-1))
        return self.update(torch.cat([x, agg], dim=-1))


class GroupMessagePassing(nn.Module):
    """Stacked rounds on the complete group graph with learned correlations."""

    def __init__(self, d_model: int, d_edge: int, n_layers: int = 2):
        super().__init__()
        self.layers = nn.ModuleList(
            MessagePassingLayer(d_model, d_edge, update_order="agg_first")
            for _ in range(n_layers))

    def forward(self, group_reps: torch.Tensor, src: torch.Tensor,
                dst: torch.Tensor, corr_dense: torch.Tensor) -> torch.Tensor:
        attr = corr_dense[:, src, dst]
        for layer in self.layers:
            group_reps = layer(group_reps, src, dst, attr)
        return group_reps


class CityMessagePassing(nn.Module):
    """Stacked rounds on the sparse city graph with inverse-distance attributes."""

    def __init__(self, d_model: int, n_layers: int = 2):
        super().__init__()
        self.layers = nn.ModuleList(
            MessagePassingLayer(d_model, 1, update_order="node_first")
            for _ in range(n_layers))

    def forward(self, city_reps: torch.Tensor, src: torch.Tensor,
                dst: torch.Tensor, edge_attr: torch.Tensor) -> torch.Tensor:
        for layer in self.layers:
            city_reps = layer(city_reps, src, dst, edge_attr)
        return city_reps


class CityFuser(nn.Module):
    """Combine local city representations with their group-based counterpart."""

    def __init__(self, d_model: int):
        super().__init__()
        self.mlp = Mlp(2 * d_model, d_model, d_model)

    def forward(self, local: torch.Tensor, group_based: torch.Tensor) -> torch.Tensor:
        return self.mlp(torch.cat([local, group_based], dim=-1))
