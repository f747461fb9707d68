"""Shared fixtures: hand-built episodes and small synthetic configurations."""

from __future__ import annotations

import numpy as np
import pytest

from halop.lob_core import EpisodeData, EpisodeSpec, TickSnapshot, VolumeSchedule


def book_snapshot(
    time_s: float,
    bid1_ticks: int,
    ask1_ticks: int,
    tick: float = 0.01,
    depth: int = 10_000,
    last_ticks: int | None = None,
    ask_depths: list[int] | None = None,
    bid_depths: list[int] | None = None,
) -> TickSnapshot:
    """A five-level book around explicit best bid/ask tick prices."""
    if last_ticks is None:
        last_ticks = ask1_ticks
    bid_depths = bid_depths or [depth] * 5
    ask_depths = ask_depths or [depth] * 5
    return TickSnapshot(
        time_offset=time_s,
        last_price=last_ticks * tick,
        bid_prices=tuple((bid1_ticks - k) * tick for k in range(5)),
        ask_prices=tuple((ask1_ticks + k) * tick for k in range(5)),
        bid_volumes=tuple(bid_depths),
        ask_volumes=tuple(ask_depths),
    )


def build_episode(
    snapshots,
    horizon_T: int,
    step_seconds: float,
    tick: float = 0.01,
    direction: int = 1,
    latency: float = 3.0,
    order_cap: float = 0.1,
    total_shares: int = 100_000,
    stock_id: str = "TEST",
    trading_day: str = "20210104",
) -> EpisodeData:
    spec = EpisodeSpec(
        stock_id=stock_id,
        trading_day=trading_day,
        tick_size=tick,
        horizon_T=horizon_T,
        step_seconds=step_seconds,
        direction=direction,
        latency_seconds=latency,
        order_cap=order_cap,
        total_shares=total_shares,
    )
    return EpisodeData.build(spec, snapshots)


def constant_book_episode(
    ask1_ticks: int = 1000,
    spread: int = 1,
    horizon_T: int = 3,
    step_seconds: float = 6.0,
    snapshot_every: float = 3.0,
    history: int = 2,
    **kwargs,
) -> EpisodeData:
    """An episode whose book never moves; friendly to hand computations."""
    n_after = int(round(horizon_T * step_seconds / snapshot_every))
    times = [(i - history) * snapshot_every for i in range(history + n_after + 1)]
    snaps = [book_snapshot(t, ask1_ticks - spread, ask1_ticks) for t in times]
    return build_episode(snaps, horizon_T, step_seconds, **kwargs)


@pytest.fixture
def uniform_schedule():
    def make(T: int) -> VolumeSchedule:
        return VolumeSchedule(np.full(T, 1.0 / T))

    return make
