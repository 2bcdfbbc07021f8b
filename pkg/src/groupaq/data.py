"""City observation panels: ingestion, cleaning, windowing, and synthesis.

A panel holds hourly observations for N cities over T hours with 8 encoded
feature channels: AQI, five scalar weather fields, and the 2-component wind
direction vector. Missing numeric cells are filled by linear interpolation
(edges held at the nearest present value) and flagged in a parallel mask.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np
import pandas as pd

FEATURES = (
    "aqi", "humidity", "rainfall", "pressure", "temperature",
    "wind_speed", "wind_east", "wind_north",
)
N_FEATURES = len(FEATURES)
AQI_INDEX = 0
WIND_COMPONENTS = (6, 7)

# Compass token -> (east, north) component vector.
WIND_VECTORS = {
    "N": (0, 1),
    "NE": (1, 1),
    "E": (1, 0),
    "SE": (1, -1),
    "S": (0, -1),
    "SW": (-1, -1),
    "W": (-1, 0),
    "NW": (-1, 1),
    "NONE": (0, 0),
}
WIND_TOKENS = tuple(WIND_VECTORS)
_VECTOR_TO_TOKEN = {v: k for k, v in WIND_VECTORS.items()}

CITIES_COLUMNS = ["city_id", "name", "longitude", "latitude"]
OBSERVATIONS_COLUMNS = [
    "city_id", "timestamp", "aqi", "humidity", "rainfall", "pressure",
    "temperature", "wind_speed", "wind_direction",
]


class IngestionError(ValueError):
    """Raised when input files violate the expected schema or invariants."""


@dataclass(frozen=True)
class CityRecord:
    city_id: int
    name: str
    longitude: float
    latitude: float


@dataclass(frozen=True)
class TimeFeatures:
    month_index: int       # 0..11
    day_of_week_index: int  # 0..6, Monday = 0
    hour_index: int        # 0..23

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.month_index, self.day_of_week_index, self.hour_index)


@dataclass
class ObservationPanel:
    """Dense hourly panel [n_cities, hours, N_FEATURES] plus fill mask."""

    start: datetime
    data: np.ndarray
    mask: np.ndarray  # True where the value was filled by interpolation

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != N_FEATURES:
            raise ValueError(f"panel data must be [cities, hours, {N_FEATURES}]")
        if self.mask.shape != self.data.shape:
            raise ValueError("mask shape must match data shape")
        if self.start.tzinfo is None:
            self.start = self.start.replace(tzinfo=timezone.utc)

    @property
    def n_cities(self) -> int:
        return self.data.shape[0]

    @property
    def hours(self) -> int:
        return self.data.shape[1]

    def timestamp_at(self, hour_index: int) -> datetime:
        return self.start + timedelta(hours=int(hour_index))

    def index_of(self, timestamp: datetime) -> int:
        if timestamp.tzinfo is None:
            timestamp = timestamp.replace(tzinfo=timezone.utc)
        delta = (timestamp - self.start).total_seconds()
        idx = delta / 3600.0
        if idx != int(idx):
            raise ValueError(f"timestamp {timestamp} is not on the panel's hour grid")
        return int(idx)


@dataclass
class WindowedSample:
    """One training sample: 24h history for all cities plus 6h AQI targets."""

    history: np.ndarray   # [n_cities, tau_in, N_FEATURES]
    target: np.ndarray    # [n_cities, tau_out], raw AQI
    anchor_time: datetime  # timestamp of the last history hour

    @property
    def time_features(self) -> TimeFeatures:
        return time_features(self.anchor_time)


@dataclass
class NormalizationStats:
    """Per-feature z-score statistics fitted on the training split."""

    mean: np.ndarray
    std: np.ndarray

    def normalize(self, history: np.ndarray) -> np.ndarray:
        return (history - self.mean) / self.std

    def denormalize(self, history: np.ndarray) -> np.ndarray:
        return history * self.std + self.mean

    def normalize_aqi(self, values: np.ndarray) -> np.ndarray:
        return (values - self.mean[AQI_INDEX]) / self.std[AQI_INDEX]

    def denormalize_aqi(self, values: np.ndarray) -> np.ndarray:
        return values * self.std[AQI_INDEX] + self.mean[AQI_INDEX]

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(mean=np.asarray(d["mean"], dtype=np.float64),
                   std=np.asarray(d["std"], dtype=np.float64))


def encode_wind_direction(token: str) -> np.ndarray:
    """Map a compass token to its 2-component (east, north) vector."""
    try:
        vec = WIND_VECTORS[token]
    except KeyError:
        raise IngestionError(
            f"unknown wind direction token {token!r}; "
            f"expected one of {', '.join(WIND_TOKENS)}") from None
    return np.array(vec, dtype=np.float64)


def time_features(timestamp: datetime) -> TimeFeatures:
    """Calendar indices (month, day-of-week, hour) of a UTC hour."""
    if timestamp.tzinfo is None:
        timestamp = timestamp.replace(tzinfo=timezone.utc)
    else:
        timestamp = timestamp.astimezone(timezone.utc)
    return TimeFeatures(
        month_index=timestamp.month - 1,
        day_of_week_index=timestamp.weekday(),
        hour_index=timestamp.hour,
    )


def interpolate_missing(series: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Fill NaN holes in a 1-D hourly series.

    Interior holes are linearly interpolated between the nearest present
    neighbors; leading/trailing holes are held at the nearest present value.
    Returns (filled, mask) where mask is True exactly at filled positions.
    """
    series = np.asarray(series, dtype=np.float64)
    present = np.isfinite(series)
    n_present = int(present.sum())
    if n_present < 2:
        raise ValueError(f"need at least 2 present values, got {n_present}")
    idx = np.arange(series.size, dtype=np.float64)
    filled = np.interp(idx, idx[present], series[present])
    return filled, ~present


def interpolate_panel(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply interpolate_missing per (city, feature) series."""
    n_cities, _, n_feat = data.shape
    filled = np.empty_like(data, dtype=np.float64)
    mask = np.zeros(data.shape, dtype=bool)
    too_sparse = []
    for c in range(n_cities):
        for f in range(n_feat):
            series = data[c, :, f]
            if np.isfinite(series).all():
                filled[c, :, f] = series
                continue
            try:
                filled[c, :, f], mask[c, :, f] = interpolate_missing(series)
            except ValueError:
                too_sparse.append((c, FEATURES[f]))
    if too_sparse:
        items = ", ".join(f"city {c} feature {f}" for c, f in too_sparse)
        raise IngestionError(f"series with fewer than 2 present values: {items}")
    return filled, mask


def make_windows(panel: ObservationPanel, tau_in: int = 24, tau_out: int = 6,
                 step: int = 1) -> list[WindowedSample]:
    """Slide a (tau_in, tau_out) window over the panel, step hours at a time.

    Yields floor((T - tau_in - tau_out) / step) + 1 chronologically ordered
    samples. The anchor of a sample is its last history hour; targets are the
    tau_out hours immediately after.
    """
    if tau_in < 1 or tau_out < 1 or step < 1:
        raise ValueError("tau_in, tau_out, and step must be >= 1")
    total = tau_in + tau_out
    if panel.hours < total:
        raise ValueError(
            f"panel has {panel.hours} hours but needs at least {total} "
            f"(tau_in={tau_in} + tau_out={tau_out})")
    if not np.isfinite(panel.data).all():
        raise ValueError("panel contains non-finite values; interpolate first")
    samples = []
    for start in range(0, panel.hours - total + 1, step):
        t_end = start + tau_in
        samples.append(WindowedSample(
            history=panel.data[:, start:t_end, :],
            target=panel.data[:, t_end:t_end + tau_out, AQI_INDEX],
            anchor_time=panel.timestamp_at(t_end - 1),
        ))
    return samples


def chronological_split(samples: list[WindowedSample]):
    """70/10/20 chronological split with floor(0.7 N), floor(0.8 N) boundaries."""
    n = len(samples)
    if n < 10:
        raise ValueError(f"need at least 10 samples to split, got {n}")
    a = int(np.floor(0.7 * n))
    b = int(np.floor(0.8 * n))
    return samples[:a], samples[a:b], samples[b:]


def fit_normalization(samples: list[WindowedSample]) -> NormalizationStats:
    """Per-feature mean/std over all training histories.

    Wind vector components pass through unscaled (mean 0, std 1); features
    with zero variance get std 1.
    """
    if not samples:
        raise ValueError("cannot fit normalization on an empty sample list")
    count = 0
    total = np.zeros(N_FEATURES, dtype=np.float64)
    for s in samples:
        total += s.history.sum(axis=(0, 1))
        count += s.history.shape[0] * s.history.shape[1]
    mean = total / count
    sq = np.zeros(N_FEATURES, dtype=np.float64)
    for s in samples:
        centered = s.history - mean
        sq += (centered * centered).sum(axis=(0, 1))
    std = np.sqrt(sq / count)
    std[std == 0.0] = 1.0
    for k in WIND_COMPONENTS:
        mean[k] = 0.0
        std[k] = 1.0
    return NormalizationStats(mean=mean, std=std)


def apply_normalization(sample: WindowedSample,
                        stats: NormalizationStats) -> WindowedSample:
    """Return a copy of the sample with a z-scored history.

    Targets stay in raw AQI units; the training loop normalizes them for the
    loss via stats.normalize_aqi and reports metrics in raw units.
    """
    return dataclasses.replace(sample, history=stats.normalize(sample.history))


# ---------------------------------------------------------------------------
# CSV ingestion

def load_cities(path: str | Path) -> list[CityRecord]:
    df = pd.read_csv(path, dtype={"name": "string"})
    if list(df.columns) != CITIES_COLUMNS:
        raise IngestionError(
            f"{path}: expected columns {CITIES_COLUMNS}, got {list(df.columns)}")
    records = []
    for row_no, row in enumerate(df.itertuples(index=False), start=2):
        try:
            city_id = int(row.city_id)
            lon = float(row.longitude)
            lat = float(row.latitude)
        except (TypeError, ValueError):
            raise IngestionError(f"{path} row {row_no}: malformed city record") from None
        if not -180.0 <= lon <= 180.0:
            raise IngestionError(f"{path} row {row_no}: longitude {lon} out of range")
        if not -90.0 <= lat <= 90.0:
            raise IngestionError(f"{path} row {row_no}: latitude {lat} out of range")
        name = "" if pd.isna(row.name) else str(row.name)
        records.append(CityRecord(city_id=city_id, name=name, longitude=lon, latitude=lat))
    records.sort(key=lambda r: r.city_id)
    ids = [r.city_id for r in records]
    if ids != list(range(len(records))):
        raise IngestionError(
            f"{path}: city_ids must be unique and contiguous from 0, got {ids}")
    return records


def load_observations(path: str | Path, cities: list[CityRecord]) -> ObservationPanel:
    """Read observations.csv into a gap-free encoded panel.

    Rows may arrive in any order. The hour grid spans min..max timestamp;
    absent rows and empty numeric cells become holes that are filled by
    linear interpolation and flagged in the mask.
    """
    df = pd.read_csv(path, dtype={"wind_direction": "string"})
    if list(df.columns) != OBSERVATIONS_COLUMNS:
        raise IngestionError(
            f"{path}: expected columns {OBSERVATIONS_COLUMNS}, got {list(df.columns)}")
    if len(df) == 0:
        raise IngestionError(f"{path}: no observation rows")
    n_cities = len(cities)

    city_ids = pd.to_numeric(df["city_id"], errors="coerce")
    bad = city_ids.isna() | (city_ids < 0) | (city_ids >= n_cities) | (city_ids % 1 != 0)
    if bad.any():
        row_no = int(bad.idxmax()) + 2
        raise IngestionError(f"{path} row {row_no}: unknown city_id {df['city_id'][bad.idxmax()]!r}")
    city_idx = city_ids.to_numpy(dtype=np.int64)

    try:
        ts = pd.to_datetime(df["timestamp"], utc=True, format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise IngestionError(f"{path}: unparseable timestamp: {exc}") from None
    off_hour = (ts.dt.minute != 0) | (ts.dt.second != 0) | (ts.dt.microsecond != 0)
    if off_hour.any():
        row_no = int(off_hour.idxmax()) + 2
        raise IngestionError(f"{path} row {row_no}: timestamp not on an hour boundary")

    start = ts.min()
    hour_idx = ((ts - start) // pd.Timedelta(hours=1)).to_numpy(dtype=np.int64)
    hours = int(hour_idx.max()) + 1

    dup = pd.Series(city_idx * hours + hour_idx).duplicated()
    if dup.any():
        row_no = int(dup.idxmax()) + 2
        raise IngestionError(f"{path} row {row_no}: duplicate (city_id, timestamp)")

    data = np.full((n_cities, hours, N_FEATURES), np.nan, dtype=np.float64)
    numeric_cols = ["aqi", "humidity", "rainfall", "pressure", "temperature", "wind_speed"]
    for k, col in enumerate(numeric_cols):
        values = pd.to_numeric(df[col], errors="coerce").to_numpy(dtype=np.float64)
        raw = df[col]
        malformed = np.isnan(values) & ~raw.isna().to_numpy()
        if malformed.any():
            row_no = int(np.argmax(malformed)) + 2
            raise IngestionError(f"{path} row {row_no}: non-numeric {col} value {raw[np.argmax(malformed)]!r}")
        data[city_idx, hour_idx, k] = values

    tokens = df["wind_direction"]
    east = np.full(len(df), np.nan)
    north = np.full(len(df), np.nan)
    for token, vec in WIND_VECTORS.items():
        hit = (tokens == token).fillna(False).to_numpy(dtype=bool)
        east[hit] = vec[0]
        north[hit] = vec[1]
    unknown = np.isnan(east) & ~tokens.isna().to_numpy()
    if unknown.any():
        row_no = int(np.argmax(unknown)) + 2
        raise IngestionError(
            f"{path} row {row_no}: unknown wind direction token "
            f"{tokens[np.argmax(unknown)]!r}")
    data[city_idx, hour_idx, WIND_COMPONENTS[0]] = east
    data[city_idx, hour_idx, WIND_COMPONENTS[1]] = north

    filled, mask = interpolate_panel(data)
    return ObservationPanel(start=start.to_pydatetime(), data=filled, mask=mask)


def load_panel(data_dir: str | Path) -> tuple[list[CityRecord], ObservationPanel]:
    """Load cities.csv + observations.csv from a directory."""
    data_dir = Path(data_dir)
    cities_path = data_dir / "cities.csv"
    obs_path = data_dir / "observations.csv"
    for p in (cities_path, obs_path):
        if not p.exists():
            raise FileNotFoundError(f"missing required data file: {p}")
    cities = load_cities(cities_path)
    panel = load_observations(obs_path, cities)
    return cities, panel


def write_cities_csv(cities: list[CityRecord], path: str | Path) -> None:
    df = pd.DataFrame(
        [(c.city_id, c.name, c.longitude, c.latitude) for c in cities],
        columns=CITIES_COLUMNS)
    df.to_csv(path, index=False, float_format="%.6f")


def write_observations_csv(cities: list[CityRecord], panel: ObservationPanel,
                           path: str | Path) -> None:
    """Emit observations.csv; cells that were interpolation-filled are left empty."""
    rows = []
    for c in range(panel.n_cities):
        for t in range(panel.hours):
            stamp = panel.timestamp_at(t).strftime("%Y-%m-%dT%H:%M:%SZ")
            cells = [str(c), stamp]
            for k in range(6):
                if panel.mask[c, t, k]:
                    cells.append("")
                else:
                    cells.append(f"{panel.data[c, t, k]:.4f}")
            if panel.mask[c, t, WIND_COMPONENTS[0]] or panel.mask[c, t, WIND_COMPONENTS[1]]:
                cells.append("")
            else:
                vec = (int(round(panel.data[c, t, WIND_COMPONENTS[0]])),
                       int(round(panel.data[c, t, WIND_COMPONENTS[1]])))
                cells.append(_VECTOR_TO_TOKEN[vec])
            rows.append(cells)
    with open(path, "w") as fh:
        fh.write(",".join(OBSERVATIONS_COLUMNS) + "\n")
        for cells in rows:
            fh.write(",".join(cells) + "\n")


def write_groups_csv(labels: np.ndarray, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("city_id,group_id\n")
        for i, g in enumerate(labels):
            fh.write(f"{i},{int(g)}\n")


# ---------------------------------------------------------------------------
# Synthetic data

SYNTH_START = datetime(2021, 3, 1, 0, 0, tzinfo=timezone.utc)


def _smooth_signal(rng: np.random.Generator, hours: int) -> np.ndarray:
    """Standardized smooth random signal: slow sinusoids plus an OU walk."""
    t = np.arange(hours, dtype=np.float64)
    signal = np.zeros(hours)
    for period in rng.uniform(60.0, 240.0, size=3):
        signal += rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi))
    walk = np.empty(hours)
    walk[0] = 0.0
    steps = rng.normal(0.0, 1.0, size=hours)
    for i in range(1, hours):
        walk[i] = 0.985 * walk[i - 1] + 0.25 * steps[i]
    signal = signal + walk
    return (signal - signal.mean()) / max(signal.std(), 1e-9)


def generate_synthetic(n_cities: int, n_groups_true: int, hours: int, seed: int,
                       missing_rate: float = 0.0,
                       ) -> tuple[list[CityRecord], ObservationPanel, np.ndarray]:
    """Generate a deterministic synthetic observation panel with planted groups.

    Cities are placed as n_groups_true spatial clusters; a few cities are
    "teleconnected", i.e. geographically inside one cluster but driven by
    another group's forcing signal. AQI follows a damped diffusion on the
    city graph pulled toward per-group forcing plus a daily cycle; weather
    fields are correlated with the AQI dynamics. Returns (cities, panel,
    true_group_labels); the labels are diagnostic only.
    """
    if n_groups_true < 1 or n_cities < n_groups_true:
        raise ValueError(
            f"need n_cities >= n_groups_true >= 1, got {n_cities}, {n_groups_true}")
    if hours < 2:
        raise ValueError("hours must be >= 2")
    if not 0.0 <= missing_rate < 0.5:
        raise ValueError("missing_rate must be in [0, 0.5)")
    rng = np.random.default_rng(seed)

    # Cluster centers on a ring wide enough that clusters stay disconnected
    # at the default 250 km graph radius.
    center_lon, center_lat = 110.0, 33.0
    if n_groups_true == 1:
        centers = np.array([[center_lon, center_lat]])
    else:
        angles = 2 * np.pi * np.arange(n_groups_true) / n_groups_true
        ring = 8.0 + 0.8 * rng.standard_normal(n_groups_true)
        centers = np.stack([center_lon + ring * np.cos(angles),
                            center_lat + 0.7 * ring * np.sin(angles)], axis=1)

    cluster = np.arange(n_cities) % n_groups_true
    locations = centers[cluster] + rng.normal(0.0, 0.55, size=(n_cities, 2))

    # Teleconnections: relabel ~10% of cities to a different forcing group.
    labels = cluster.copy()
    if n_groups_true > 1:
        n_tele = max(1, n_cities // 10)
        tele = rng.choice(n_cities, size=n_tele, replace=False)
        labels[tele] = (labels[tele] + 1 + rng.integers(0, n_groups_true - 1, size=n_tele)) % n_groups_true

    # Forcing signals: one shared national component plus one per group.
    common = _smooth_signal(rng, hours)
    group_signals = np.stack([_smooth_signal(rng, hours) for _ in range(n_groups_true)])
    base, group_amp, common_amp, daily_amp = 90.0, 45.0, 20.0, 10.0
    t = np.arange(hours, dtype=np.float64)
    daily = np.sin(2 * np.pi * (t - 6.0) / 24.0)
    target = (base
              + group_amp * group_signals[labels]
              + common_amp * common[None, :]
              + daily_amp * daily[None, :])

    # Damped diffusion on the city graph toward the forcing target.
    from .graphs import build_city_graph
    graph = build_city_graph(locations, radius_km=250.0)
    weights = np.zeros((n_cities, n_cities))
    weights[graph.edge_index[1], graph.edge_index[0]] = graph.edge_weight
    row_sum = weights.sum(axis=1, keepdims=True)
    weights = np.divide(weights, row_sum, out=np.zeros_like(weights), where=row_sum > 0)

    aqi = np.empty((n_cities, hours))
    aqi[:, 0] = target[:, 0] + rng.normal(0.0, 3.0, size=n_cities)
    noise = rng.normal(0.0, 2.5, size=(n_cities, hours))
    for k in range(1, hours):
        prev = aqi[:, k - 1]
        diffusion = weights @ prev - prev * (row_sum[:, 0] > 0)
        aqi[:, k] = prev + 0.20 * diffusion + 0.30 * (target[:, k] - prev) + noise[:, k]
    aqi = np.maximum(aqi, 1.0)

    # Weather correlated with the AQI dynamics.
    season = np.sin(2 * np.pi * t / (24.0 * 90.0))
    temperature = (15.0 + 9.0 * np.sin(2 * np.pi * (t - 9.0) / 24.0)[None, :]
                   + 6.0 * season[None, :]
                   + rng.normal(0.0, 1.0, size=(n_cities, hours)))
    humidity = np.clip(55.0 + 0.12 * (aqi - base)
                       + 9.0 * np.sin(2 * np.pi * (t + 3.0) / 24.0)[None, :]
                       + rng.normal(0.0, 4.0, size=(n_cities, hours)), 5.0, 100.0)
    pressure = (1013.0 + 7.0 * common[None, :] - 0.015 * (aqi - base)
                + rng.normal(0.0, 0.8, size=(n_cities, hours)))
    wind_speed = np.clip(6.0 - 0.025 * (aqi - base)
                         + rng.normal(0.0, 1.2, size=(n_cities, hours)), 0.1, 25.0)
    rain_seed = rng.gamma(shape=1.1, scale=1.4, size=(n_cities, hours))
    rainfall = np.where(humidity > 82.0, rain_seed, 0.0)

    # Wind direction: slowly rotating per-group angle snapped to 8 tokens;
    # calm hours get no sustained direction.
    group_angle = np.stack([_smooth_signal(rng, hours) for _ in range(n_groups_true)])
    angle = np.pi * group_angle[labels] + rng.normal(0.0, 0.3, size=(n_cities, hours))
    sector = np.round(angle / (np.pi / 4.0)).astype(int) % 8
    compass = np.array(["E", "NE", "N", "NW", "W", "SW", "S", "SE"], dtype="<U4")
    token_grid = compass[sector]
    token_grid[wind_speed < 0.8] = "NONE"

    data = np.empty((n_cities, hours, N_FEATURES))
    data[:, :, 0] = aqi
    data[:, :, 1] = humidity
    data[:, :, 2] = rainfall
    data[:, :, 3] = pressure
    data[:, :, 4] = temperature
    data[:, :, 5] = wind_speed
    vec_east = np.vectorize(lambda tok: WIND_VECTORS[tok][0])
    vec_north = np.vectorize(lambda tok: WIND_VECTORS[tok][1])
    data[:, :, 6] = vec_east(token_grid)
    data[:, :, 7] = vec_north(token_grid)

    if missing_rate > 0.0:
        holes = rng.random(size=data.shape) < missing_rate
        # wind components go missing together (one token cell in the CSV)
        holes[:, :, WIND_COMPONENTS[1]] = holes[:, :, WIND_COMPONENTS[0]]
        for c in range(n_cities):
            for f in range(N_FEATURES):
                keep = ~holes[c, :, f]
                if keep.sum() < 2:
                    holes[c, :2, f] = False
        data = np.where(holes, np.nan, data)

    filled, mask = interpolate_panel(data)
    panel = ObservationPanel(start=SYNTH_START, data=filled, mask=mask)
    cities = [CityRecord(city_id=i, name=f"city_{i:03d}",
                         longitude=float(locations[i, 0]),
                         latitude=float(locations[i, 1]))
              for i in range(n_cities)]
    return cities, panel, labels


def write_synthetic_dataset(out_dir: str | Path, n_cities: int, n_groups_true: int,
                            hours: int, seed: int, missing_rate: float = 0.0) -> None:
    """Generate and write cities.csv, observations.csv, and groups_true.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cities, panel, labels = generate_synthetic(
        n_cities, n_groups_true, hours, seed, missing_rate=missing_rate)
    write_cities_csv(cities, out_dir / "cities.csv")
    write_observations_csv(cities, panel, out_dir / "observations.csv")
    write_groups_csv(labels, out_dir / "groups_true.csv")
