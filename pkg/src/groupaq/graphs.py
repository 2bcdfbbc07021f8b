"""Static graphs: distance-thresholded city graph, complete city-group graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EARTH_RADIUS_KM = 6371.0


@dataclass
class CityGraph:
    """Directed edge list over cities; both orientations of each undirected link.

    edge_index is [2, E] with row 0 = source, row 1 = destination; the edge
    attribute is the scalar inverse distance, symmetric across orientations.
    """

    n_nodes: int
    edge_index: np.ndarray
    edge_weight: np.ndarray

    @property
    def n_edges(self) -> int:
        return self.edge_index.shape[1]

    def incoming_edges(self, node: int) -> np.ndarray:
        """Indices into the edge list of edges arriving at `node`."""
        return np.nonzero(self.edge_index[1] == node)[0]


@dataclass
class GroupGraph:
    """Complete directed graph over groups, no self loops."""

    n_nodes: int
    edge_index: np.ndarray
    edge_attr: np.ndarray = field(default=None)

    @property
    def n_edges(self) -> int:
        return self.edge_index.shape[1]


def pairwise_distance(locations: np.ndarray, mode: str = "haversine") -> np.ndarray:
    """All-pairs distance matrix from (longitude, latitude) rows.

    "haversine" returns great-circle kilometers on a 6371 km sphere;
    "euclidean_degrees" returns the literal planar distance in degrees.
    """
    locations = np.asarray(locations, dtype=np.float64)
    if locations.ndim != 2 or locations.shape[1] != 2:
        raise ValueError("locations must be [n, 2] (lon, lat)")
    if mode == "euclidean_degrees":
        diff = locations[:, None, :] - locations[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=2))
    if mode != "haversine":
        raise ValueError(f"unknown distance mode {mode!r}")
    lon = np.radians(locations[:, 0])
    lat = np.radians(locations[:, 1])
    dlat = 0.5 * (lat[:, None] - lat[None, :])
    dlon = 0.5 * (lon[:, None] - lon[None, :])
    h = np.sin(dlat) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


def build_city_graph(locations: np.ndarray, radius_km: float,
                     distance: str = "haversine") -> CityGraph:
    """Connect city pairs closer than radius_km with weight 1/distance.

    With distance="euclidean_degrees" the threshold is interpreted in degrees.
    Coincident distinct cities are rejected: their inverse-distance weight is
    undefined.
    """
    if radius_km <= 0:
        raise ValueError("radius must be positive")
    dist = pairwise_distance(locations, mode=distance)
    n = dist.shape[0]
    off_diag = ~np.eye(n, dtype=bool)
    coincident = (dist == 0.0) & off_diag
    if coincident.any():
        i, j = np.argwhere(coincident)[0]
        raise ValueError(
            f"cities {i} and {j} have identical coordinates; "
            "inverse-distance edge weight is undefined")
    adjacency = off_diag & (dist < radius_km)
    src, dst = np.nonzero(adjacency)
    edge_index = np.stack([src, dst]).astype(np.int64)
    edge_weight = 1.0 / dist[src, dst] if src.size else np.zeros(0)
    return CityGraph(n_nodes=n, edge_index=edge_index, edge_weight=edge_weight)


def build_group_graph(n_groups: int, d_edge: int = 12) -> GroupGraph:
    """Complete directed graph on n_groups nodes with zero-initialized attributes."""
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    src, dst = np.nonzero(~np.eye(n_groups, dtype=bool))
    edge_index = np.stack([src, dst]).astype(np.int64)
    return GroupGraph(n_nodes=n_groups, edge_index=edge_index,
                      edge_attr=np.zeros((src.size, d_edge)))


def write_city_graph_csv(graph: CityGraph, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("src,dst,weight\n")
        for e in range(graph.n_edges):
            fh.write(f"{graph.edge_index[0, e]},{graph.edge_index[1, e]},"
                     f"{graph.edge_weight[e]:.10g}\n")
