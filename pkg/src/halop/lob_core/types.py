"""Core market-data and episode types.

Prices cross the package boundary in currency units, but every snapshot is
converted to integer tick counts when an :class:`EpisodeData` is built, and
all simulation arithmetic runs on the tick grid.  Everything here is
immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

BOOK_LEVELS = 5

# Relative tolerance when snapping a currency price onto the tick grid.
_GRID_RTOL = 1e-6


class EpisodeDataError(ValueError):
    """Raised when snapshot data violates episode invariants."""


def _round_half_away(x: float) -> int:
    """Round to nearest integer, ties away from zero."""
    if x >= 0.0:
        return int(math.floor(x + 0.5))
    return int(math.ceil(x - 0.5))


def pct_from_ticks(ticks: int, current_price: float, tick_size: float) -> float:
    """Convert a signed tick offset into a fractional price offset.

    Returns ``ticks * tick_size / current_price``; e.g. -3 ticks on a 10.00
    stock with a 0.01 tick is -0.003 (i.e. -0.3%).
    """
    if current_price <= 0.0:
        raise ValueError(f"current_price must be positive, got {current_price}")
    if tick_size <= 0.0:
        raise ValueError(f"tick_size must be positive, got {tick_size}")
    return ticks * tick_size / current_price


def ticks_from_pct(pct: float, current_price: float, tick_size: float) -> int:
    """Convert a fractional price offset into a signed tick count.

    Rounds to the nearest integer tick; ties round away from zero so the
    mapping is deterministic on cell boundaries.
    """
    if current_price <= 0.0:
        raise ValueError(f"current_price must be positive, got {current_price}")
    if tick_size <= 0.0:
        raise ValueError(f"tick_size must be positive, got {tick_size}")
    return _round_half_away(pct * current_price / tick_size)


def currency_to_ticks(price: float, tick_size: float) -> int:
    """Snap a currency price onto the tick grid, erroring if it is off-grid."""
    if tick_size <= 0.0:
        raise ValueError(f"tick_size must be positive, got {tick_size}")
    ticks = _round_half_away(price / tick_size)
    if abs(price - ticks * tick_size) > _GRID_RTOL * tick_size:
        raise ValueError(f"price {price} is not a multiple of tick size {tick_size}")
    return ticks


@dataclass(frozen=True)
class TickSnapshot:
    """One market observation: last price plus the top five book levels."""

    time_offset: float
    last_price: float
    bid_prices: tuple[float, ...]
    ask_prices: tuple[float, ...]
    bid_volumes: tuple[int, ...]
    ask_volumes: tuple[int, ...]

    def __post_init__(self) -> None:
        for name in ("bid_prices", "ask_prices", "bid_volumes", "ask_volumes"):
            value = tuple(getattr(self, name))
            if len(value) != BOOK_LEVELS:
                raise ValueError(f"{name} must have {BOOK_LEVELS} entries, got {len(value)}")
            object.__setattr__(self, name, value)


def validate_snapshot(snap: TickSnapshot, tick_size: float) -> list[str]:
    """Check all snapshot invariants; returns a list of violation messages.

    An empty list means the snapshot is well formed.  Violations are data,
    not exceptions: callers decide whether to skip, repair or fail.
    """
    violations: list[str] = []
    prices = (snap.last_price, *snap.bid_prices, *snap.ask_prices)
    for p in prices:
        if p <= 0.0:
            violations.append(f"non-positive price {p}")
        else:
            ticks = _round_half_away(p / tick_size)
            if abs(p - ticks * tick_size) > _GRID_RTOL * tick_size:
                violations.append(f"off-tick price {p} for tick size {tick_size}")
    for i in range(BOOK_LEVELS - 1):
        if snap.bid_prices[i + 1] >= snap.bid_prices[i]:
            violations.append(f"bid prices not strictly descending at level {i + 1}")
        if snap.ask_prices[i + 1] <= snap.ask_prices[i]:
            violations.append(f"ask prices not strictly ascending at level {i + 1}")
    if snap.ask_prices[0] <= snap.bid_prices[0]:
        violations.append(
            f"crossed book: best ask {snap.ask_prices[0]} <= best bid {snap.bid_prices[0]}"
        )
    for name in ("bid_volumes", "ask_volumes"):
        for v in getattr(snap, name):
            if v < 0:
                violations.append(f"negative volume {v} in {name}")
    return violations


@dataclass(frozen=True)
class EpisodeSpec:
    """One (stock, trading day) execution mission.

    ``total_shares`` is the parent order size; order volumes are fractions of
    it, so the fill model can compare them with displayed book depth.
    """

    stock_id: str
    trading_day: str
    tick_size: float
    horizon_T: int
    step_seconds: float
    direction: int = 1
    latency_seconds: float = 3.0
    order_cap: float = 0.1
    total_shares: int = 100_000

    def __post_init__(self) -> None:
        if self.horizon_T < 1:
            raise ValueError(f"horizon_T must be >= 1, got {self.horizon_T}")
        if self.tick_size <= 0.0:
            raise ValueError(f"tick_size must be positive, got {self.tick_size}")
        if self.direction not in (1, -1):
            raise ValueError(f"direction must be +1 or -1, got {self.direction}")
        if not 0.0 < self.order_cap <= 1.0:
            raise ValueError(f"order_cap must be in (0, 1], got {self.order_cap}")
        if self.step_seconds <= 0.0:
            raise ValueError(f"step_seconds must be positive, got {self.step_seconds}")
        if self.latency_seconds < 0.0:
            raise ValueError(f"latency_seconds must be >= 0, got {self.latency_seconds}")
        if self.total_shares <= 0:
            raise ValueError(f"total_shares must be positive, got {self.total_shares}")


class VolumeSchedule:
    """Per-step target volumes as fractions of the parent order; sums to one."""

    __slots__ = ("targets",)

    def __init__(self, targets: Sequence[float]):
        arr = np.asarray(targets, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("schedule must be a non-empty 1-d sequence")
        if np.any(arr < 0.0):
            raise ValueError("schedule targets must be non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"schedule must sum to 1, got {total!r}")
        arr.setflags(write=False)
        self.targets = arr

    def __len__(self) -> int:
        return int(self.targets.size)

    def target(self, t: int) -> float:
        """Target fraction for 1-based step ``t``."""
        return float(self.targets[t - 1])

    def cumulative(self, t: int) -> float:
        """Cumulative target through 1-based step ``t``."""
        return float(self.targets[:t].sum())


@dataclass(frozen=True)
class Order:
    """A child order for one decision step; volume is an inventory fraction."""

    step_t: int
    kind: str  # "limit" | "market"
    volume: float
    limit_price_ticks: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("limit", "market"):
            raise ValueError(f"kind must be 'limit' or 'market', got {self.kind!r}")
        if self.volume < 0.0:
            raise ValueError(f"volume must be >= 0, got {self.volume}")
        if self.kind == "limit":
            if self.limit_price_ticks is None or self.limit_price_ticks < 1:
                raise ValueError("limit orders need a positive limit_price_ticks")


@dataclass(frozen=True)
class Fill:
    """Execution result of one child order within its decision window."""

    executed_volume: float
    avg_price: float | None
    cancelled_volume: float

    def __post_init__(self) -> None:
        if self.executed_volume < 0.0 or self.cancelled_volume < 0.0:
            raise ValueError("fill volumes must be non-negative")
        if self.executed_volume > 0.0 and self.avg_price is None:
            raise ValueError("non-empty fill needs an average price")


@dataclass(frozen=True)
class EpisodeData:
    """A validated snapshot stream plus tick-grid arrays for simulation.

    ``times`` is seconds relative to the first decision (negative offsets are
    history).  Price arrays hold integer tick counts; volume arrays hold
    shares.  Arrays are read-only views shared by every consumer.
    """

    spec: EpisodeSpec
    snapshots: tuple[TickSnapshot, ...]
    times: np.ndarray = field(repr=False)
    last_t: np.ndarray = field(repr=False)
    bid_t: np.ndarray = field(repr=False)
    ask_t: np.ndarray = field(repr=False)
    bid_v: np.ndarray = field(repr=False)
    ask_v: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, spec: EpisodeSpec, snapshots: Sequence[TickSnapshot]) -> "EpisodeData":
        """Validate snapshots against ``spec`` and precompute tick arrays."""
        snaps = tuple(snapshots)
        if not snaps:
            raise EpisodeDataError("episode needs at least one snapshot")
        n = len(snaps)
        times = np.empty(n, dtype=np.float64)
        last_t = np.empty(n, dtype=np.int64)
        bid_t = np.empty((n, BOOK_LEVELS), dtype=np.int64)
        ask_t = np.empty((n, BOOK_LEVELS), dtype=np.int64)
        bid_v = np.empty((n, BOOK_LEVELS), dtype=np.int64)
        ask_v = np.empty((n, BOOK_LEVELS), dtype=np.int64)
        prev_time = -math.inf
        for i, snap in enumerate(snaps):
            problems = validate_snapshot(snap, spec.tick_size)
            if problems:
                raise EpisodeDataError(f"snapshot {i}: " + "; ".join(problems))
            if snap.time_offset <= prev_time:
                raise EpisodeDataError(
                    f"snapshot {i}: time_offset {snap.time_offset} not strictly increasing"
                )
            prev_time = snap.time_offset
            times[i] = snap.time_offset
            last_t[i] = currency_to_ticks(snap.last_price, spec.tick_size)
            for k in range(BOOK_LEVELS):
                bid_t[i, k] = currency_to_ticks(snap.bid_prices[k], spec.tick_size)
                ask_t[i, k] = currency_to_ticks(snap.ask_prices[k], spec.tick_size)
                bid_v[i, k] = snap.bid_volumes[k]
                ask_v[i, k] = snap.ask_volumes[k]
        end_time = spec.horizon_T * spec.step_seconds
        if times[-1] < end_time - 1e-9:
            raise EpisodeDataError(
                f"snapshots end at {times[-1]}s but the mission runs to {end_time}s"
            )
        for arr in (times, last_t, bid_t, ask_t, bid_v, ask_v):
            arr.setflags(write=False)
        return cls(spec, snaps, times, last_t, bid_t, ask_t, bid_v, ask_v)

    def __len__(self) -> int:
        return len(self.snapshots)

    def index_at_or_after(self, time_s: float) -> int:
        """Index of the first snapshot at or after ``time_s`` (tolerant)."""
        idx = int(np.searchsorted(self.times, time_s - 1e-9, side="left"))
        return min(idx, len(self.snapshots) - 1)

    def index_at_or_before(self, time_s: float) -> int:
        """Index of the latest snapshot at or before ``time_s`` (tolerant)."""
        idx = int(np.searchsorted(self.times, time_s + 1e-9, side="right")) - 1
        return max(idx, 0)

    def close_price(self) -> float:
        """Final last price in currency units, used for price-band grouping."""
        return float(self.last_t[-1] * self.spec.tick_size)
