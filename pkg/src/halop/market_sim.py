"""Deterministic execution environment over replayed tick snapshots.

Replays one episode's book stream, fills limit/market child orders under a
communication delay and a per-order size cap, tracks the schedule deficit,
and settles the episode into a terminal reward.

Fill model (replay, no market impact): a buy limit at price p consumes
displayed ask volume at levels priced at or below p, level by level, across
every snapshot of its decision window after the delay.  Consumption at a
price level is remembered for the rest of the window until that level's
displayed volume increases, so standing liquidity is never double counted.
Sells are symmetric against bids.  Market orders walk the displayed levels
of the arrival snapshot; any remainder beyond the displayed book executes at
the deepest displayed level (recorded as a floor event).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lob_core import EpisodeData, Fill, Order, VolumeSchedule

__all__ = [
    "PublicState",
    "SimState",
    "SimTrace",
    "SettlementReport",
    "ExecutionSim",
    "catch_up_volume",
    "benchmark_price",
    "settle",
]

N_PRICE_FEATURES = 11  # last + 5 bids + 5 asks
N_VOLUME_FEATURES = 10
N_FEATURES = N_PRICE_FEATURES + N_VOLUME_FEATURES


@dataclass(frozen=True)
class PublicState:
    """Window of recent snapshots in two renditions.

    ``standardized`` holds prices as returns relative to the window-start
    midprice and volumes z-scored within the window (scale free, stage-1
    input).  ``raw_log`` holds logs of the absolute prices and volumes.
    Rows are ordered oldest to newest; columns are
    [last, bid1..5, ask1..5, bidv1..5, askv1..5].
    """

    standardized: np.ndarray
    raw_log: np.ndarray
    last_price_ticks: int

    @property
    def window(self) -> int:
        return self.standardized.shape[0]


@dataclass(frozen=True)
class SimState:
    """Private execution status before acting at step ``t`` (1-based)."""

    t: int
    remaining_inventory: float
    deficit: float
    time_remaining: float
    cursor: int

    def private_vector(self) -> np.ndarray:
        return np.array(
            [self.remaining_inventory, self.deficit, self.time_remaining], dtype=np.float64
        )


@dataclass
class SimTrace:
    """Per-episode execution record consumed by settlement and audits."""

    submitted: list[float] = field(default_factory=list)  # v_t actually ordered
    executed: list[float] = field(default_factory=list)  # executed fraction per step
    exec_price_ticks: list[float] = field(default_factory=list)  # nan when nothing filled
    fills: list[Fill] = field(default_factory=list)
    breakdown: list[list[tuple[int, int, float]]] = field(default_factory=list)
    floor_events: list[int] = field(default_factory=list)
    final_deficit: float = 0.0
    final_price_ticks: float = math.nan
    final_breakdown: list[tuple[int, int, float]] = field(default_factory=list)


@dataclass(frozen=True)
class SettlementReport:
    """Episode settlement: fills, benchmark prices and the terminal reward."""

    reward_bps: float
    reward_raw: float
    benchmark_notional: float
    benchmark_prices: tuple[float, ...]
    executed: tuple[float, ...]
    exec_prices: tuple[float | None, ...]
    submitted: tuple[float, ...]
    final_deficit: float
    final_price: float | None
    cost_per_unit: float
    cancellation_violation: bool
    direction: int

    def conservation_gap(self) -> float:
        return abs(sum(self.executed) + self.final_deficit - 1.0)

    def to_json_dict(self) -> dict:
        return {
            "reward_bps": self.reward_bps,
            "reward_raw": self.reward_raw,
            "benchmark_notional": self.benchmark_notional,
            "benchmark_prices": list(self.benchmark_prices),
            "executed": list(self.executed),
            "exec_prices": list(self.exec_prices),
            "submitted": list(self.submitted),
            "final_deficit": self.final_deficit,
            "final_price": self.final_price,
            "cost_per_unit": self.cost_per_unit,
            "cancellation_violation": self.cancellation_violation,
            "direction": self.direction,
        }


def catch_up_volume(state: SimState, schedule: VolumeSchedule) -> float:
    """Volume the agent must order at ``state.t``: target plus open deficit."""
    return schedule.target(state.t) + state.deficit


def _walk_levels(
    prices: np.ndarray,
    volumes: np.ndarray,
    shares: float,
    last_ticks: int,
) -> tuple[float, bool, list[tuple[int, float]]]:
    """Average tick price of taking ``shares`` from displayed levels.

    Levels must be ordered best first.  Any remainder past the displayed book
    executes at the deepest displayed level (or the last trade price if the
    side shows nothing); the boolean reports whether that floor was used.
    """
    remaining = shares
    cost = 0.0
    taken: list[tuple[int, float]] = []
    floor_price = None
    for price, vol in zip(prices, volumes):
        if vol <= 0:
            continue
        floor_price = int(price)
        take = min(float(vol), remaining)
        if take > 0.0:
            cost += take * price
            taken.append((int(price), take))
            remaining -= take
        if remaining <= 0.0:
            break
    used_floor = False
    if remaining > 0.0:
        if floor_price is None:
            floor_price = int(last_ticks)
        cost += remaining * floor_price
        taken.append((floor_price, remaining))
        used_floor = True
    return cost / shares, used_floor, taken


def _arrival_index(episode: EpisodeData, t: int) -> int:
    spec = episode.spec
    arrival_time = (t - 1) * spec.step_seconds + spec.latency_seconds
    return episode.index_at_or_after(arrival_time)


def benchmark_price(episode: EpisodeData, schedule: VolumeSchedule, t: int) -> float:
    """Market price (currency) of executing the step-``t`` target at once.

    Uses the identical arrival delay and book walk as the simulator, so a
    strategy that sends market orders every step earns exactly zero reward.
    """
    if not 1 <= t <= episode.spec.horizon_T:
        raise ValueError(f"step {t} outside horizon {episode.spec.horizon_T}")
    return _benchmark_price_ticks(episode, schedule, t) * episode.spec.tick_size


def _benchmark_price_ticks(episode: EpisodeData, schedule: VolumeSchedule, t: int) -> float:
    spec = episode.spec
    i = _arrival_index(episode, t)
    shares = schedule.target(t) * spec.total_shares
    if spec.direction == 1:
        prices, volumes = episode.ask_t[i], episode.ask_v[i]
    else:
        prices, volumes = episode.bid_t[i], episode.bid_v[i]
    if shares <= 0.0:
        live = volumes > 0
        return float(prices[live][0]) if live.any() else float(episode.last_t[i])
    price, _, _ = _walk_levels(prices, volumes, shares, int(episode.last_t[i]))
    return price


class ExecutionSim:
    """Sequential simulator for one episode; create one instance per episode.

    Instances share no mutable state, so episodes can run in parallel.
    ``reset`` is pure: it rebuilds the same initial state every time.
    """

    def __init__(self, episode: EpisodeData, schedule: VolumeSchedule, window: int = 8):
        if len(schedule) != episode.spec.horizon_T:
            raise ValueError(
                f"schedule length {len(schedule)} != horizon {episode.spec.horizon_T}"
            )
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        available = episode.index_at_or_before(0.0) + 1
        if episode.times[0] > 1e-9 or available < window:
            raise ValueError(
                f"insufficient snapshots: window {window} needs {window} snapshots "
                f"at or before the first decision, found {available}"
            )
        self.episode = episode
        self.schedule = schedule
        self.window = window
        self._state: SimState | None = None
        self._trace: SimTrace | None = None
        self._done = False

    # -- state construction ------------------------------------------------

    def _public_state(self, cursor: int) -> PublicState:
        ep = self.episode
        lo = cursor - self.window + 1
        sl = slice(lo, cursor + 1)
        prices = np.concatenate(
            [ep.last_t[sl, None], ep.bid_t[sl], ep.ask_t[sl]], axis=1
        ).astype(np.float64)
        volumes = np.concatenate([ep.bid_v[sl], ep.ask_v[sl]], axis=1).astype(np.float64)

        mid0 = 0.5 * (ep.bid_t[lo, 0] + ep.ask_t[lo, 0])
        std_prices = prices / mid0 - 1.0
        v_mean = volumes.mean()
        v_std = volumes.std()
        std_volumes = (volumes - v_mean) / v_std if v_std > 0.0 else np.zeros_like(volumes)
        standardized = np.concatenate([std_prices, std_volumes], axis=1)

        raw_log = np.concatenate(
            [np.log(prices * ep.spec.tick_size), np.log1p(volumes)], axis=1
        )
        standardized.setflags(write=False)
        raw_log.setflags(write=False)
        return PublicState(standardized, raw_log, int(ep.last_t[cursor]))

    def _state_at(self, t: int, remaining: float, deficit: float) -> tuple[PublicState, SimState]:
        decision_time = (t - 1) * self.episode.spec.step_seconds
        cursor = self.episode.index_at_or_before(decision_time)
        state = SimState(
            t=t,
            remaining_inventory=remaining,
            deficit=deficit,
            time_remaining=1.0 - t / self.episode.spec.horizon_T,
            cursor=cursor,
        )
        return self._public_state(cursor), state

    def reset(self) -> tuple[PublicState, SimState]:
        self._trace = SimTrace()
        self._done = False
        pub, state = self._state_at(1, 1.0, 0.0)
        self._state = state
        return pub, state

    # -- stepping ----------------------------------------------------------

    @property
    def state(self) -> SimState:
        if self._state is None:
            raise RuntimeError("call reset() before stepping")
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    def catch_up_volume(self) -> float:
        return catch_up_volume(self.state, self.schedule)

    def current_price_ticks(self) -> int:
        """Latest trade price (ticks) at the pending decision time."""
        return int(self.episode.last_t[self.state.cursor])

    def _fill_limit(
        self, t: int, limit_ticks: int, need_shares: float
    ) -> tuple[float, float, list[tuple[int, int, float]]]:
        """Fill a resting limit order across its decision window.

        Returns (filled_shares, cost_in_tick_units, per-snapshot breakdown).
        """
        ep = self.episode
        spec = ep.spec
        start = (t - 1) * spec.step_seconds
        arrival = start + spec.latency_seconds
        end = t * spec.step_seconds
        i0 = int(np.searchsorted(ep.times, arrival - 1e-9, side="left"))
        i1 = int(np.searchsorted(ep.times, end - 1e-9, side="left"))
        filled = 0.0
        cost = 0.0
        events: list[tuple[int, int, float]] = []
        consumed: dict[int, float] = {}
        last_seen: dict[int, int] = {}
        buy = spec.direction == 1
        for i in range(i0, i1):
            if filled >= need_shares - 1e-12:
                break
            prices = ep.ask_t[i] if buy else ep.bid_t[i]
            volumes = ep.ask_v[i] if buy else ep.bid_v[i]
            for level in range(prices.shape[0]):
                price = int(prices[level])
                if (buy and price > limit_ticks) or (not buy and price < limit_ticks):
                    break
                disp = int(volumes[level])
                prev = last_seen.get(price)
                if prev is not None and disp > prev:
                    consumed[price] = 0.0  # displayed volume grew: new liquidity
                last_seen[price] = disp
                avail = disp - consumed.get(price, 0.0)
                take = min(avail, need_shares - filled)
                if take > 0.0:
                    consumed[price] = consumed.get(price, 0.0) + take
                    filled += take
                    cost += take * price
                    events.append((i, price, take))
                if filled >= need_shares - 1e-12:
                    break
        return filled, cost, events

    def step(self, order: Order) -> tuple[PublicState, SimState, Fill, bool]:
        """Execute one decision step; at the horizon the remainder is bought
        (or sold) with an automatic market order before settlement."""
        if self._done:
            raise RuntimeError("episode already finished")
        state = self.state
        trace = self._trace
        assert trace is not None
        t = state.t
        if order.step_t != t:
            raise ValueError(f"order for step {order.step_t} but simulator is at step {t}")
        v_t = self.catch_up_volume()
        if abs(order.volume - v_t) > 1e-9:
            raise ValueError(
                f"order volume {order.volume} does not match required catch-up volume {v_t}"
            )
        spec = self.episode.spec
        cap_fraction = min(v_t, spec.order_cap)
        need_shares = cap_fraction * spec.total_shares

        events: list[tuple[int, int, float]]
        if order.kind == "market":
            i = _arrival_index(self.episode, t)
            if spec.direction == 1:
                prices, volumes = self.episode.ask_t[i], self.episode.ask_v[i]
            else:
                prices, volumes = self.episode.bid_t[i], self.episode.bid_v[i]
            if need_shares > 0.0:
                avg_ticks, used_floor, taken = _walk_levels(
                    prices, volumes, need_shares, int(self.episode.last_t[i])
                )
                filled = need_shares
                cost = avg_ticks * need_shares
                events = [(i, price, shares) for price, shares in taken]
                if used_floor:
                    trace.floor_events.append(t)
            else:
                filled, cost, events = 0.0, 0.0, []
        else:
            limit_ticks = order.limit_price_ticks
            assert limit_ticks is not None
            filled, cost, events = self._fill_limit(t, limit_ticks, need_shares)

        executed = min(filled / spec.total_shares, v_t)  # guard one-ulp overshoot
        avg_price_ticks = (cost / filled) if filled > 0.0 else math.nan
        cancelled = max(v_t - executed, 0.0)
        deficit = state.deficit + self.schedule.target(t) - executed
        remaining = state.remaining_inventory - executed

        fill = Fill(
            executed_volume=executed,
            avg_price=(avg_price_ticks * spec.tick_size) if filled > 0.0 else None,
            cancelled_volume=cancelled,
        )
        trace.submitted.append(v_t)
        trace.executed.append(executed)
        trace.exec_price_ticks.append(avg_price_ticks)
        trace.fills.append(fill)
        trace.breakdown.append(events)

        done = t == spec.horizon_T
        if done:
            trace.final_deficit = deficit
            if deficit > 0.0:
                j = self.episode.index_at_or_after(spec.horizon_T * spec.step_seconds)
                if spec.direction == 1:
                    prices, volumes = self.episode.ask_t[j], self.episode.ask_v[j]
                else:
                    prices, volumes = self.episode.bid_t[j], self.episode.bid_v[j]
                avg_ticks, used_floor, taken = _walk_levels(
                    prices, volumes, deficit * spec.total_shares, int(self.episode.last_t[j])
                )
                trace.final_price_ticks = avg_ticks
                trace.final_breakdown = [(j, price, shares) for price, shares in taken]
                if used_floor:
                    trace.floor_events.append(-1)
            self._done = True
            cursor = self.episode.index_at_or_before(t * spec.step_seconds)
            next_state = SimState(
                t=t + 1,
                remaining_inventory=remaining,
                deficit=deficit,
                time_remaining=0.0,
                cursor=cursor,
            )
            pub = self._public_state(cursor)
        else:
            pub, next_state = self._state_at(t + 1, remaining, deficit)
        self._state = next_state
        return pub, next_state, fill, done

    # -- settlement ----------------------------------------------------------

    def trace(self) -> SimTrace:
        if not self._done or self._trace is None:
            raise RuntimeError("episode not finished")
        return self._trace

    def settle(self) -> SettlementReport:
        return settle(self.trace(), self.episode, self.schedule, self.episode.spec.direction)


def settle(
    trace: SimTrace,
    episode: EpisodeData,
    schedule: VolumeSchedule,
    direction: int,
) -> SettlementReport:
    """Terminal reward for a finished episode.

    The raw reward is the benchmark notional minus the strategy's execution
    cost, signed by the trade direction; it is also reported in basis points
    of the benchmark notional so episodes of different price levels compare.
    """
    spec = episode.spec
    T = spec.horizon_T
    if len(trace.executed) != T:
        raise ValueError(f"trace covers {len(trace.executed)} steps, expected {T}")
    if direction != spec.direction:
        raise ValueError(
            f"direction {direction} does not match the episode mission ({spec.direction})"
        )
    bench_ticks = np.array(
        [_benchmark_price_ticks(episode, schedule, t) for t in range(1, T + 1)]
    )
    targets = schedule.targets
    bench_notional_ticks = float(np.dot(targets, bench_ticks))

    executed = np.asarray(trace.executed)
    prices = np.asarray(trace.exec_price_ticks)
    cost_ticks = float(np.sum(executed[executed > 0.0] * prices[executed > 0.0]))
    if trace.final_deficit > 0.0:
        cost_ticks += trace.final_deficit * trace.final_price_ticks

    reward_raw_ticks = direction * (bench_notional_ticks - cost_ticks)
    reward_bps = 1e4 * reward_raw_ticks / bench_notional_ticks

    submitted_total = float(np.sum(trace.submitted))
    violation = trace.final_deficit + submitted_total > 2.0

    tick = spec.tick_size
    return SettlementReport(
        reward_bps=reward_bps,
        reward_raw=reward_raw_ticks * tick,
        benchmark_notional=bench_notional_ticks * tick,
        benchmark_prices=tuple(float(p) * tick for p in bench_ticks),
        executed=tuple(float(v) for v in trace.executed),
        exec_prices=tuple(
            float(p) * tick if v > 0.0 else None
            for v, p in zip(trace.executed, trace.exec_price_ticks)
        ),
        submitted=tuple(float(v) for v in trace.submitted),
        final_deficit=float(trace.final_deficit),
        final_price=(
            float(trace.final_price_ticks) * tick if trace.final_deficit > 0.0 else None
        ),
        cost_per_unit=cost_ticks * tick,
        cancellation_violation=bool(violation),
        direction=direction,
    )
