"""Episode CSV ingestion and dataset directory layout.

One file per (stock, day), named ``{stock_id}_{YYYYMMDD}.csv`` with header
``time_offset_s,last,bid1..bid5,bidv1..bidv5,ask1..ask5,askv1..askv5``.
Prices are decimal strings on the tick grid; volumes are non-negative
integers.  A dataset directory holds a ``meta.json`` with the mission
parameters shared by its episodes.
"""

from __future__ import annotations

import csv
import json
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .types import BOOK_LEVELS, EpisodeData, EpisodeDataError, EpisodeSpec, TickSnapshot

CSV_HEADER = (
    ["time_offset_s", "last"]
    + [f"bid{i}" for i in range(1, 6)]
    + [f"bidv{i}" for i in range(1, 6)]
    + [f"ask{i}" for i in range(1, 6)]
    + [f"askv{i}" for i in range(1, 6)]
)

META_FILENAME = "meta.json"


class EpisodeLoadError(ValueError):
    """Raised when an episode CSV cannot be parsed or validated."""


def episode_filename(stock_id: str, trading_day: str) -> str:
    return f"{stock_id}_{trading_day}.csv"


def _parse_episode_filename(path: Path) -> tuple[str, str]:
    stem = path.stem
    if "_" not in stem:
        raise EpisodeLoadError(f"{path.name}: expected filename '{{stock_id}}_{{YYYYMMDD}}.csv'")
    stock_id, trading_day = stem.rsplit("_", 1)
    return stock_id, trading_day


def _tick_decimal(tick_size: float) -> Decimal:
    d = Decimal(repr(tick_size))
    if d <= 0:
        raise ValueError(f"tick_size must be positive, got {tick_size}")
    return d


def _format_price(ticks: int, tick: Decimal) -> str:
    return format(ticks * tick, "f")


def write_episode_csv(episode: EpisodeData, path: str | Path) -> Path:
    """Write an episode to CSV; prices come out exactly on the tick grid."""
    path = Path(path)
    tick = _tick_decimal(episode.spec.tick_size)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for i in range(len(episode)):
            row = [format(episode.times[i], ".3f"), _format_price(int(episode.last_t[i]), tick)]
            row += [_format_price(int(episode.bid_t[i, k]), tick) for k in range(BOOK_LEVELS)]
            row += [str(int(episode.bid_v[i, k])) for k in range(BOOK_LEVELS)]
            row += [_format_price(int(episode.ask_t[i, k]), tick) for k in range(BOOK_LEVELS)]
            row += [str(int(episode.ask_v[i, k])) for k in range(BOOK_LEVELS)]
            writer.writerow(row)
    return path


def _parse_price(text: str, tick: Decimal, row: int, col: str) -> float:
    try:
        value = Decimal(text)
    except InvalidOperation as exc:
        raise EpisodeLoadError(f"row {row}: column {col}: bad decimal {text!r}") from exc
    ratio = value / tick
    if ratio != ratio.to_integral_value():
        raise EpisodeLoadError(
            f"row {row}: column {col}: price {text} is not on the {tick} tick grid"
        )
    return float(value)


def load_episode_csv(
    path: str | Path,
    tick_size: float,
    *,
    horizon_T: int,
    step_seconds: float,
    direction: int = 1,
    latency_seconds: float = 3.0,
    order_cap: float = 0.1,
    total_shares: int = 100_000,
    stock_id: str | None = None,
    trading_day: str | None = None,
) -> EpisodeData:
    """Load one episode CSV into validated :class:`EpisodeData`.

    Stock id and trading day default to the filename convention.  Errors name
    the offending row (1-based, excluding the header).
    """
    path = Path(path)
    if stock_id is None or trading_day is None:
        fn_stock, fn_day = _parse_episode_filename(path)
        stock_id = stock_id or fn_stock
        trading_day = trading_day or fn_day
    tick = _tick_decimal(tick_size)
    snapshots: list[TickSnapshot] = []
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EpisodeLoadError(f"{path.name}: empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            missing = set(CSV_HEADER) - {h.strip() for h in header}
            raise EpisodeLoadError(
                f"{path.name}: bad header; missing columns {sorted(missing)}"
                if missing
                else f"{path.name}: header does not match the episode schema"
            )
        prev_time = None
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise EpisodeLoadError(
                    f"row {row_no}: expected {len(CSV_HEADER)} columns, got {len(row)}"
                )
            try:
                t = float(row[0])
            except ValueError as exc:
                raise EpisodeLoadError(f"row {row_no}: bad time_offset_s {row[0]!r}") from exc
            if prev_time is not None and t <= prev_time:
                raise EpisodeLoadError(
                    f"row {row_no}: time_offset_s {row[0]} not strictly increasing"
                )
            prev_time = t
            last = _parse_price(row[1], tick, row_no, "last")
            bids = tuple(_parse_price(row[2 + k], tick, row_no, f"bid{k + 1}") for k in range(5))
            try:
                bidv = tuple(int(row[7 + k]) for k in range(5))
                askv = tuple(int(row[17 + k]) for k in range(5))
            except ValueError as exc:
                raise EpisodeLoadError(f"row {row_no}: bad volume field") from exc
            asks = tuple(_parse_price(row[12 + k], tick, row_no, f"ask{k + 1}") for k in range(5))
            snapshots.append(TickSnapshot(t, last, bids, asks, bidv, askv))
    spec = EpisodeSpec(
        stock_id=stock_id,
        trading_day=trading_day,
        tick_size=tick_size,
        horizon_T=horizon_T,
        step_seconds=step_seconds,
        direction=direction,
        latency_seconds=latency_seconds,
        order_cap=order_cap,
        total_shares=total_shares,
    )
    try:
        return EpisodeData.build(spec, snapshots)
    except EpisodeDataError as exc:
        raise EpisodeLoadError(f"{path.name}: {exc}") from exc


def dataset_meta_path(data_dir: str | Path) -> Path:
    return Path(data_dir) / META_FILENAME


def write_dataset_meta(data_dir: str | Path, meta: dict) -> Path:
    path = dataset_meta_path(data_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_dataset_meta(data_dir: str | Path) -> dict:
    path = dataset_meta_path(data_dir)
    if not path.exists():
        raise EpisodeLoadError(f"dataset {data_dir} has no {META_FILENAME}")
    return json.loads(path.read_text(encoding="utf-8"))


def list_dataset_episodes(data_dir: str | Path) -> list[tuple[str, str]]:
    """All (stock_id, trading_day) pairs present in a dataset directory."""
    pairs = []
    for path in sorted(Path(data_dir).glob("*.csv")):
        try:
            pairs.append(_parse_episode_filename(path))
        except EpisodeLoadError:
            continue
    return pairs


def load_dataset_episode(data_dir: str | Path, stock_id: str, trading_day: str) -> EpisodeData:
    """Load one episode from a dataset directory using its meta.json."""
    meta = read_dataset_meta(data_dir)
    path = Path(data_dir) / episode_filename(stock_id, trading_day)
    return load_episode_csv(
        path,
        tick_size=float(meta["tick_size"]),
        horizon_T=int(meta["horizon_T"]),
        step_seconds=float(meta["step_seconds"]),
        direction=int(meta.get("direction", 1)),
        latency_seconds=float(meta.get("latency_seconds", 3.0)),
        order_cap=float(meta.get("order_cap", 0.1)),
        total_shares=int(meta.get("total_shares", 100_000)),
        stock_id=stock_id,
        trading_day=trading_day,
    )
