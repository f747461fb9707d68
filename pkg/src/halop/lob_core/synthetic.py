"""Synthetic tick-stream generator.

Stands in for proprietary exchange data: the midprice follows a
mean-reverting random walk on the tick grid, the book keeps a persistent
spread, and displayed depth shrinks for low-priced names (penny stocks carry
less liquidity).  Output is deterministic in the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .types import BOOK_LEVELS, EpisodeData, EpisodeSpec, TickSnapshot

LOW_BAND_MAX = 10.0
MEDIUM_BAND_MAX = 50.0


def band_of_price(price: float) -> str:
    """Price band label: low (< 10.00), medium (10.00-50.00), high (> 50.00)."""
    if price < LOW_BAND_MAX:
        return "low"
    if price <= MEDIUM_BAND_MAX:
        return "medium"
    return "high"


_BAND_DEPTH_FACTOR = {"low": 0.5, "medium": 1.0, "high": 2.0}


@dataclass(frozen=True)
class SynthParams:
    """Knobs for one synthetic trading day.

    ``volatility`` is the per-snapshot probability of a one-tick midprice
    move; ``mean_reversion`` biases moves back toward the base price in
    proportion to the displacement in ticks.
    """

    stock_id: str = "SYN000"
    trading_day: str = "20210104"
    base_price: float = 10.00
    tick_size: float = 0.01
    horizon_T: int = 90
    step_seconds: float = 120.0
    snapshot_interval_s: float = 3.0
    warmup_snapshots: int = 32
    volatility: float = 0.3
    mean_reversion: float = 0.01
    drift_ticks: float = 0.0  # anchor drift per snapshot, in ticks
    spread_ticks: int = 1
    depth_base: float = 5000.0
    depth_growth: float = 1.25
    depth_jitter: float = 0.3
    direction: int = 1
    latency_seconds: float = 3.0
    order_cap: float = 0.1
    total_shares: int = 90_000

    def validate(self) -> None:
        if self.base_price <= 0.0 or self.tick_size <= 0.0:
            raise ValueError("base_price and tick_size must be positive")
        if self.base_price < 8 * self.tick_size:
            raise ValueError("base_price too close to zero for a five-level book")
        if not 0.0 <= self.volatility <= 1.0:
            raise ValueError(f"volatility must be in [0, 1], got {self.volatility}")
        if self.mean_reversion < 0.0:
            raise ValueError("mean_reversion must be >= 0")
        if self.spread_ticks < 1:
            raise ValueError(f"spread_ticks must be >= 1, got {self.spread_ticks}")
        if self.snapshot_interval_s <= 0.0:
            raise ValueError("snapshot_interval_s must be positive")
        if self.warmup_snapshots < 1:
            raise ValueError("warmup_snapshots must be >= 1")
        if self.depth_base <= 0.0 or self.depth_growth <= 0.0 or self.depth_jitter < 0.0:
            raise ValueError("depth parameters must be positive (jitter >= 0)")
        if self.horizon_T < 1 or self.step_seconds <= 0.0:
            raise ValueError("horizon_T must be >= 1 with positive step_seconds")

    def spec(self) -> EpisodeSpec:
        return EpisodeSpec(
            stock_id=self.stock_id,
            trading_day=self.trading_day,
            tick_size=self.tick_size,
            horizon_T=self.horizon_T,
            step_seconds=self.step_seconds,
            direction=self.direction,
            latency_seconds=self.latency_seconds,
            order_cap=self.order_cap,
            total_shares=self.total_shares,
        )


def _midprice_path(params: SynthParams, n: int, rng: np.random.Generator) -> np.ndarray:
    anchor = max(int(round(params.base_price / params.tick_size)), BOOK_LEVELS + params.spread_ticks + 2)
    # bid5 must stay >= 1 tick, so the walk reflects off a floor.
    floor = BOOK_LEVELS + params.spread_ticks + 1
    mids = np.empty(n, dtype=np.int64)
    mids[0] = anchor
    if params.volatility == 0.0:
        mids[:] = anchor
        return mids
    uniforms = rng.random(n - 1)
    m = anchor
    vol = params.volatility
    for i in range(1, n):
        target = anchor + params.drift_ticks * i
        bias = params.mean_reversion * (target - m)
        bias = min(0.45, max(-0.45, bias))
        p_up = vol * (0.5 + bias)
        p_down = vol * (0.5 - bias)
        u = uniforms[i - 1]
        if u < p_up:
            m += 1
        elif u < p_up + p_down:
            m -= 1
        m = max(m, floor)
        mids[i] = m
    return mids


def generate_synthetic_day(params: SynthParams, seed: int | list[int]) -> EpisodeData:
    """Generate a validated synthetic episode, deterministic in ``seed``."""
    params.validate()
    rng = np.random.default_rng(seed)
    dt_ms = int(round(params.snapshot_interval_s * 1000))
    if dt_ms <= 0:
        raise ValueError("snapshot_interval_s too small")
    end_ms = int(math.ceil(params.horizon_T * params.step_seconds * 1000))
    n_after = end_ms // dt_ms + (1 if end_ms % dt_ms else 0) + 1
    offsets_ms = [(i - params.warmup_snapshots) * dt_ms for i in range(params.warmup_snapshots + n_after)]
    n = len(offsets_ms)

    mids = _midprice_path(params, n, rng)
    depth_factor = _BAND_DEPTH_FACTOR[band_of_price(params.base_price)]
    level_scale = params.depth_base * depth_factor * params.depth_growth ** np.arange(BOOK_LEVELS)
    if params.depth_jitter > 0.0:
        jitter = rng.lognormal(mean=0.0, sigma=params.depth_jitter, size=(n, 2, BOOK_LEVELS))
    else:
        jitter = np.ones((n, 2, BOOK_LEVELS))

    half_up = (params.spread_ticks + 1) // 2
    tick = params.tick_size
    snapshots = []
    for i in range(n):
        m = int(mids[i])
        ask1 = m + half_up
        bid1 = ask1 - params.spread_ticks
        # Buy-pressure tape: the latest trade prints at the ask, so a -1 tick
        # limit is the canonical passive placement one level inside the spread.
        last = ask1
        bids = tuple((bid1 - k) * tick for k in range(BOOK_LEVELS))
        asks = tuple((ask1 + k) * tick for k in range(BOOK_LEVELS))
        bidv = tuple(max(1, int(round(level_scale[k] * jitter[i, 0, k]))) for k in range(BOOK_LEVELS))
        askv = tuple(max(1, int(round(level_scale[k] * jitter[i, 1, k]))) for k in range(BOOK_LEVELS))
        snapshots.append(
            TickSnapshot(offsets_ms[i] / 1000.0, last * tick, bids, asks, bidv, askv)
        )
    return EpisodeData.build(params.spec(), snapshots)


def universe_params(
    base: SynthParams,
    stock_id: str,
    base_price: float,
    trading_day: str,
) -> SynthParams:
    """Per-episode parameter variant for a universe of stocks and days."""
    return replace(base, stock_id=stock_id, base_price=base_price, trading_day=trading_day)


def episode_seed(master_seed: int, stock_index: int, day_index: int) -> list[int]:
    """Stable per-(stock, day) seed material, independent of iteration order."""
    return [master_seed, 0x5EED, stock_index, day_index]
