"""Domain types for market data, episodes, orders and fills."""

from .types import (
    EpisodeData,
    EpisodeSpec,
    Fill,
    Order,
    TickSnapshot,
    VolumeSchedule,
    currency_to_ticks,
    pct_from_ticks,
    ticks_from_pct,
    validate_snapshot,
)
from .csv_io import (
    EpisodeLoadError,
    dataset_meta_path,
    episode_filename,
    list_dataset_episodes,
    load_dataset_episode,
    load_episode_csv,
    read_dataset_meta,
    write_dataset_meta,
    write_episode_csv,
)
from .synthetic import SynthParams, band_of_price, generate_synthetic_day

__all__ = [
    "EpisodeData",
    "EpisodeSpec",
    "Fill",
    "Order",
    "TickSnapshot",
    "VolumeSchedule",
    "currency_to_ticks",
    "pct_from_ticks",
    "ticks_from_pct",
    "validate_snapshot",
    "EpisodeLoadError",
    "dataset_meta_path",
    "episode_filename",
    "list_dataset_episodes",
    "load_dataset_episode",
    "load_episode_csv",
    "read_dataset_meta",
    "write_dataset_meta",
    "write_episode_csv",
    "SynthParams",
    "band_of_price",
    "generate_synthetic_day",
]
