"""Baselines, excess-return metrics and the price-band grouping study.

The Return metric is the excess return (bps) of a strategy's average
execution price over the TWAP-with-market-order execution of the same
episode, which is therefore identically zero for the market-order strategy
under a TWAP schedule.  PnL subtracts a 5 bps penalty for every episode
whose cancellation rate breaches the 50% regulatory cap.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .lob_core import EpisodeData, Order, VolumeSchedule, band_of_price
from .market_sim import ExecutionSim, PublicState, SettlementReport, SimState

__all__ = [
    "twap_schedule",
    "vwap_schedule",
    "interval_volume_curve",
    "Strategy",
    "MarketOrderStrategy",
    "FixedOffsetStrategy",
    "EpisodeResult",
    "run_strategy",
    "MetricsReport",
    "compute_metrics",
    "grouping_report",
    "CANCELLATION_PENALTY_BPS",
]

CANCELLATION_PENALTY_BPS = 5.0


# -- schedules ---------------------------------------------------------------


def twap_schedule(T: int) -> VolumeSchedule:
    """Even split into T pieces."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    targets = np.full(T, 1.0 / T)
    return VolumeSchedule(targets / targets.sum())


def vwap_schedule(history: Sequence[np.ndarray], lookback: int = 21) -> VolumeSchedule:
    """Mean per-interval volume share over the most recent history days.

    ``history`` holds one per-interval volume curve per prior day, oldest
    first; fewer days than the lookback uses whatever exists.  Zero total
    volume falls back to TWAP with a warning.
    """
    if not history:
        raise ValueError("vwap_schedule needs at least one prior-day volume curve")
    curves = [np.asarray(c, dtype=np.float64) for c in history[-lookback:]]
    T = curves[0].size
    if any(c.size != T for c in curves):
        raise ValueError("volume curves must all have the same length")
    shares = []
    for c in curves:
        total = c.sum()
        if total > 0.0:
            shares.append(c / total)
    if not shares:
        warnings.warn("no historical volume; falling back to TWAP")
        return twap_schedule(T)
    mean_share = np.mean(shares, axis=0)
    return VolumeSchedule(mean_share / mean_share.sum())


def interval_volume_curve(episode: EpisodeData, T: int | None = None) -> np.ndarray:
    """Displayed top-of-book volume summed per decision interval.

    Stands in for traded volume when building VWAP curves from snapshot-only
    data: the snapshot schema carries no trade prints.
    """
    T = T or episode.spec.horizon_T
    step = episode.spec.step_seconds
    curve = np.zeros(T)
    top = (episode.bid_v[:, 0] + episode.ask_v[:, 0]).astype(np.float64)
    for t in range(T):
        lo = int(np.searchsorted(episode.times, t * step - 1e-9, side="left"))
        hi = int(np.searchsorted(episode.times, (t + 1) * step - 1e-9, side="left"))
        curve[t] = top[lo:hi].sum()
    return curve


# -- strategies ---------------------------------------------------------------


class Strategy(Protocol):
    """Per-step decision rule driven by the simulator."""

    def act(self, sim: ExecutionSim, pub: PublicState, state: SimState,
            rng: np.random.Generator) -> Order: ...


class MarketOrderStrategy:
    """Sends the full catch-up volume as a market order every step."""

    def act(self, sim, pub, state, rng) -> Order:
        return Order(step_t=state.t, kind="market", volume=sim.catch_up_volume())


class FixedOffsetStrategy:
    """Limit order at a constant tick offset from the current price."""

    def __init__(self, offset_ticks: int):
        self.offset_ticks = offset_ticks

    def act(self, sim, pub, state, rng) -> Order:
        price = max(sim.current_price_ticks() + self.offset_ticks, 1)
        return Order(step_t=state.t, kind="limit", volume=sim.catch_up_volume(),
                     limit_price_ticks=price)


@dataclass(frozen=True)
class EpisodeResult:
    """One episode's evaluation row."""

    stock_id: str
    trading_day: str
    excess_return_bps: float
    cancellation_violation: bool
    band: str
    close_price: float
    reward_bps: float

    def to_json_dict(self) -> dict:
        return {
            "stock_id": self.stock_id,
            "trading_day": self.trading_day,
            "excess_return_bps": self.excess_return_bps,
            "cancellation_violation": self.cancellation_violation,
            "band": self.band,
            "close_price": self.close_price,
            "reward_bps": self.reward_bps,
        }


def _twap_reference_report(episode: EpisodeData, window: int) -> SettlementReport:
    """Settlement of the TWAP-with-market-order benchmark on this episode."""
    sched = twap_schedule(episode.spec.horizon_T)
    sim = ExecutionSim(episode, sched, window)
    sim.reset()
    strategy = MarketOrderStrategy()
    rng = np.random.default_rng(0)
    done = False
    while not done:
        order = strategy.act(sim, None, sim.state, rng)
        _, _, _, done = sim.step(order)
    return sim.settle()


def episode_result(
    episode: EpisodeData, report: SettlementReport, reference: SettlementReport
) -> EpisodeResult:
    ref_cost = reference.cost_per_unit
    D = episode.spec.direction
    excess = 1e4 * D * (ref_cost - report.cost_per_unit) / reference.benchmark_notional
    close = episode.close_price()
    return EpisodeResult(
        stock_id=episode.spec.stock_id,
        trading_day=episode.spec.trading_day,
        excess_return_bps=excess,
        cancellation_violation=report.cancellation_violation,
        band=band_of_price(close),
        close_price=close,
        reward_bps=report.reward_bps,
    )


def run_strategy(
    strategy: Strategy,
    episodes: Sequence[EpisodeData],
    schedules: Sequence[VolumeSchedule],
    window: int = 8,
    seed: int = 0,
) -> list[EpisodeResult]:
    """Simulate each episode once and score it against TWAP-with-market-order.

    Episodes whose simulation fails are skipped with a warning; everything
    else is deterministic in the seed.
    """
    results: list[EpisodeResult] = []
    for i, (episode, schedule) in enumerate(zip(episodes, schedules)):
        try:
            sim = ExecutionSim(episode, schedule, window)
            pub, state = sim.reset()
            rng = np.random.default_rng([seed, i])
            done = False
            while not done:
                order = strategy.act(sim, pub, state, rng)
                pub, state, _, done = sim.step(order)
            report = sim.settle()
            reference = _twap_reference_report(episode, window)
        except (ValueError, RuntimeError) as exc:
            warnings.warn(
                f"skipping episode {episode.spec.stock_id}/{episode.spec.trading_day}: {exc}"
            )
            continue
        results.append(episode_result(episode, report, reference))
    return results


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    """Return/Std/t/PnL summary over a set of episode results."""

    return_bps: float
    std_bps: float
    t_value: float
    pnl_bps: float
    n: int
    violation_count: int

    def to_json_dict(self) -> dict:
        return {
            "return_bps": self.return_bps,
            "std_bps": self.std_bps,
            "t_value": self.t_value,
            "pnl_bps": self.pnl_bps,
            "n": self.n,
            "violation_count": self.violation_count,
        }


def compute_metrics(results: Sequence[EpisodeResult]) -> MetricsReport:
    """Return is the mean excess return; Std the population deviation;
    t = Return / (Std / sqrt(n - 1)); PnL applies the per-episode
    cancellation penalty and averages it back into Return units."""
    n = len(results)
    if n < 2:
        raise ValueError(f"metrics need at least 2 episodes, got {n}")
    returns = np.array([r.excess_return_bps for r in results])
    ret = float(returns.mean())
    std = float(returns.std())
    if std > 0.0:
        t_value = ret / (std / math.sqrt(n - 1))
    elif ret == 0.0:
        t_value = 0.0
    else:
        warnings.warn("zero dispersion with nonzero mean; t-value reported as infinite")
        t_value = math.copysign(math.inf, ret)
    violations = sum(r.cancellation_violation for r in results)
    pnl = ret - CANCELLATION_PENALTY_BPS * violations / n
    return MetricsReport(
        return_bps=ret,
        std_bps=std,
        t_value=t_value,
        pnl_bps=pnl,
        n=n,
        violation_count=violations,
    )


def grouping_report(results: Sequence[EpisodeResult]) -> tuple[dict[str, MetricsReport], dict[str, int]]:
    """Metrics per price band; bands with fewer than 2 episodes are omitted
    and reported in the second mapping with their counts."""
    by_band: dict[str, list[EpisodeResult]] = {}
    for r in results:
        by_band.setdefault(r.band, []).append(r)
    reports: dict[str, MetricsReport] = {}
    omitted: dict[str, int] = {}
    for band in ("low", "medium", "high"):
        rows = by_band.get(band, [])
        if len(rows) < 2:
            if rows:
                omitted[band] = len(rows)
            continue
        reports[band] = compute_metrics(rows)
    return reports, omitted
