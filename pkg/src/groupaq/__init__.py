"""Hierarchical city-group graph forecasting for hourly air quality.

The package learns a soft assignment of cities to latent groups end to end,
encodes correlations between groups as edge attributes, and runs message
passing on both the distance-based city graph and the complete group graph
inside an encoder-decoder forecaster.
"""

from .config import TrainConfig, ConfigError, config_from_dict, load_config
from .data import (CityRecord, IngestionError, NormalizationStats,
                   ObservationPanel, TimeFeatures, WindowedSample,
                   apply_normalization, chronological_split,
                   encode_wind_direction, fit_normalization,
                   generate_synthetic, interpolate_missing, load_panel,
                   make_windows, time_features, write_synthetic_dataset)
from .graphs import (CityGraph, GroupGraph, build_city_graph,
                     build_group_graph, pairwise_distance)
from .grouping import (kmeans_assignment, normalize_locations,
                       soft_assignment)
from .model import (CheckpointError, Forecaster, load_checkpoint, mae_loss,
                    save_checkpoint)
from .training import (DataBundle, TrainResult, TrainingError,
                       adjusted_rand_index, build_model, evaluate,
                       export_grouping, forecast_at, prepare_data,
                       run_ablation, sweep_groups, train)

__version__ = "0.1.0"
