"""Tests for domain types, conversions, CSV ingestion and the generator."""

import numpy as np
import pytest

from halop.lob_core import (
    EpisodeLoadError,
    EpisodeSpec,
    SynthParams,
    TickSnapshot,
    VolumeSchedule,
    generate_synthetic_day,
    load_episode_csv,
    pct_from_ticks,
    ticks_from_pct,
    validate_snapshot,
    write_episode_csv,
)
from halop.lob_core.types import EpisodeDataError, currency_to_ticks

from conftest import book_snapshot, build_episode


class TestConversions:
    def test_pct_from_ticks_three_ticks_on_ten(self):
        # -3 ticks on a 10.00 stock with a cent tick is -0.3%
        assert pct_from_ticks(-3, 10.00, 0.01) == pytest.approx(-0.003, abs=1e-15)

    def test_pct_zero_identity(self):
        for price, tick in [(10.0, 0.01), (3.14, 0.02), (250.0, 0.05)]:
            assert pct_from_ticks(0, price, tick) == 0.0

    def test_pct_derived(self):
        assert pct_from_ticks(-10, 100.00, 0.01) == pytest.approx(-0.001, abs=1e-15)

    def test_ticks_from_pct_inverts_tick_offset(self):
        assert ticks_from_pct(-0.003, 10.00, 0.01) == -3

    def test_ticks_zero(self):
        assert ticks_from_pct(0.0, 57.30, 0.01) == 0

    def test_ticks_rounds_away_from_zero(self):
        # -0.155% of 10.00 is -1.55 ticks: rounds to -2
        assert ticks_from_pct(-0.00155, 10.00, 0.01) == -2
        # exact .5 boundaries with exactly representable arithmetic
        assert ticks_from_pct(1.5, 1.0, 1.0) == 2
        assert ticks_from_pct(-1.5, 1.0, 1.0) == -2
        assert ticks_from_pct(2.5, 1.0, 1.0) == 3

    @pytest.mark.parametrize("bad", [(0.0, 0.01), (10.0, 0.0), (-1.0, 0.01), (10.0, -0.5)])
    def test_invalid_arguments(self, bad):
        price, tick = bad
        with pytest.raises(ValueError):
            pct_from_ticks(1, price, tick)
        with pytest.raises(ValueError):
            ticks_from_pct(0.001, price, tick)

    def test_round_trip_exhaustive(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            price_ticks = int(rng.integers(50, 200_000))
            tick = float(rng.choice([0.01, 0.02, 0.05, 0.1]))
            price = price_ticks * tick
            for j in range(-1000, 1001, 7):
                pct = pct_from_ticks(j, price, tick)
                assert ticks_from_pct(pct, price, tick) == j

    def test_currency_to_ticks(self):
        assert currency_to_ticks(10.01, 0.01) == 1001
        with pytest.raises(ValueError):
            currency_to_ticks(10.005, 0.01)


class TestValidateSnapshot:
    def test_well_formed(self):
        assert validate_snapshot(book_snapshot(0.0, 999, 1000), 0.01) == []

    def test_crossed_book(self):
        snap = TickSnapshot(
            0.0, 10.00,
            tuple(10.01 - 0.01 * k for k in range(5)),
            tuple(10.00 + 0.01 * k for k in range(5)),
            (1,) * 5, (1,) * 5,
        )
        assert any("crossed" in v for v in validate_snapshot(snap, 0.01))

    def test_off_tick_price(self):
        snap = book_snapshot(0.0, 999, 1000)
        snap = TickSnapshot(0.0, 10.005, snap.bid_prices, snap.ask_prices,
                            snap.bid_volumes, snap.ask_volumes)
        assert any("off-tick" in v for v in validate_snapshot(snap, 0.01))

    def test_negative_volume_and_bad_ordering(self):
        snap = TickSnapshot(
            0.0, 10.00,
            (9.99, 9.99, 9.97, 9.96, 9.95),
            (10.00, 10.01, 10.02, 10.03, 10.04),
            (10, 10, 10, 10, -5), (10,) * 5,
        )
        problems = validate_snapshot(snap, 0.01)
        assert any("descending" in v for v in problems)
        assert any("negative volume" in v for v in problems)


class TestVolumeSchedule:
    def test_sum_enforced(self):
        with pytest.raises(ValueError):
            VolumeSchedule([0.5, 0.4])

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            VolumeSchedule([1.5, -0.5])

    def test_target_and_cumulative(self):
        sched = VolumeSchedule([0.25, 0.75])
        assert sched.target(1) == 0.25
        assert sched.cumulative(2) == pytest.approx(1.0)


class TestEpisodeSpec:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"horizon_T": 0},
            {"tick_size": 0.0},
            {"direction": 2},
            {"order_cap": 0.0},
            {"order_cap": 1.5},
            {"total_shares": 0},
        ],
    )
    def test_invariants(self, kwargs):
        base = dict(stock_id="S", trading_day="20210104", tick_size=0.01,
                    horizon_T=10, step_seconds=6.0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            EpisodeSpec(**base)


class TestEpisodeData:
    def test_unsorted_times_rejected(self):
        snaps = [book_snapshot(0.0, 999, 1000), book_snapshot(0.0, 999, 1000)]
        with pytest.raises(EpisodeDataError, match="increasing"):
            build_episode(snaps, horizon_T=1, step_seconds=0.0001)

    def test_coverage_required(self):
        snaps = [book_snapshot(0.0, 999, 1000), book_snapshot(3.0, 999, 1000)]
        with pytest.raises(EpisodeDataError, match="mission"):
            build_episode(snaps, horizon_T=10, step_seconds=60.0)


class TestCsvRoundTrip:
    def test_single_row_file(self, tmp_path):
        path = tmp_path / "ABC_20210104.csv"
        # degenerate mission window so a single snapshot provides coverage
        ep = build_episode([book_snapshot(0.0, 999, 1000)], horizon_T=1, step_seconds=1e-9)
        write_episode_csv(ep, path)
        loaded = load_episode_csv(path, 0.01, horizon_T=1, step_seconds=1e-9)
        assert len(loaded) == 1
        assert loaded.spec.stock_id == "ABC"
        assert loaded.spec.trading_day == "20210104"

    def test_unsorted_rows_error_names_row(self, tmp_path):
        path = tmp_path / "ABC_20210104.csv"
        ep = build_episode(
            [book_snapshot(0.0, 999, 1000), book_snapshot(3.0, 999, 1000)],
            horizon_T=1, step_seconds=3.0,
        )
        write_episode_csv(ep, path)
        lines = path.read_text().splitlines()
        lines[1], lines[2] = lines[2], lines[1]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(EpisodeLoadError, match="row 2"):
            load_episode_csv(path, 0.01, horizon_T=1, step_seconds=3.0)

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "ABC_20210104.csv"
        path.write_text("time_offset_s,last\n0.0,10.0\n")
        with pytest.raises(EpisodeLoadError, match="header"):
            load_episode_csv(path, 0.01, horizon_T=1, step_seconds=1.0)

    def test_generate_write_load_round_trip(self, tmp_path):
        params = SynthParams(horizon_T=6, step_seconds=9.0, warmup_snapshots=4,
                             base_price=7.77, volatility=0.6, total_shares=10_000)
        ep = generate_synthetic_day(params, 123)
        path = tmp_path / f"{params.stock_id}_{params.trading_day}.csv"
        write_episode_csv(ep, path)
        loaded = load_episode_csv(
            path, params.tick_size, horizon_T=6, step_seconds=9.0,
            total_shares=10_000,
        )
        assert np.array_equal(loaded.times, ep.times)
        assert np.array_equal(loaded.last_t, ep.last_t)
        assert np.array_equal(loaded.bid_t, ep.bid_t)
        assert np.array_equal(loaded.ask_t, ep.ask_t)
        assert np.array_equal(loaded.bid_v, ep.bid_v)
        assert np.array_equal(loaded.ask_v, ep.ask_v)


class TestSyntheticGenerator:
    def test_zero_volatility_constant_price(self):
        params = SynthParams(horizon_T=4, step_seconds=6.0, warmup_snapshots=3, volatility=0.0)
        ep = generate_synthetic_day(params, 99)
        assert len(set(ep.last_t.tolist())) == 1

    def test_same_seed_bit_identical(self):
        params = SynthParams(horizon_T=4, step_seconds=6.0, warmup_snapshots=3, volatility=0.7)
        a = generate_synthetic_day(params, 5)
        b = generate_synthetic_day(params, 5)
        assert np.array_equal(a.last_t, b.last_t)
        assert np.array_equal(a.bid_v, b.bid_v)
        assert np.array_equal(a.ask_v, b.ask_v)
        c = generate_synthetic_day(params, 6)
        assert not np.array_equal(a.bid_v, c.bid_v)

    def test_long_stream_passes_validator(self):
        # 10,000+ snapshots, all on-grid and well ordered
        params = SynthParams(horizon_T=100, step_seconds=300.0, snapshot_interval_s=3.0,
                             warmup_snapshots=5, volatility=0.9, mean_reversion=0.02)
        ep = generate_synthetic_day(params, 31)
        assert len(ep) >= 10_000
        violations = [v for s in ep.snapshots for v in validate_snapshot(s, params.tick_size)]
        assert violations == []

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            generate_synthetic_day(SynthParams(volatility=1.5), 0)
        with pytest.raises(ValueError):
            generate_synthetic_day(SynthParams(spread_ticks=0), 0)
        with pytest.raises(ValueError):
            generate_synthetic_day(SynthParams(base_price=-1.0), 0)

    def test_depth_scales_with_price_band(self):
        low = generate_synthetic_day(SynthParams(base_price=5.0, horizon_T=3,
                                                 step_seconds=6.0, warmup_snapshots=3), 1)
        high = generate_synthetic_day(SynthParams(base_price=80.0, horizon_T=3,
                                                  step_seconds=6.0, warmup_snapshots=3), 1)
        assert high.ask_v.mean() > 2.5 * low.ask_v.mean()
