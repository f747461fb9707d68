"""Command-line entry points.

Subcommands: ``generate-data`` (synthetic universe to CSV), ``train`` (PPO
training run), ``backtest`` (run a strategy over a dataset), ``report``
(format a backtest report).  All randomness flows from ``--seed``; repeated
invocations with the same seed produce bit-identical outputs.  Failures exit
nonzero with a one-line JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import eval_metrics as em
from .config import data_config_from, load_config, train_config_from
from .lob_core import (
    episode_filename,
    generate_synthetic_day,
    list_dataset_episodes,
    load_dataset_episode,
    read_dataset_meta,
    write_dataset_meta,
    write_episode_csv,
)
from .ppo_trainer import build_model, model_from_checkpoint, train
from .ppo_trainer.models import PolicyStrategy

__all__ = ["main"]


class CliError(ValueError):
    """User-facing command error."""


def _generate_data(args) -> int:
    cfg = data_config_from(load_config(args.config))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = cfg.meta()
    meta["seed"] = args.seed
    write_dataset_meta(out, meta)
    for si, stock in enumerate(cfg.stocks):
        for di, day in enumerate(cfg.days):
            episode = generate_synthetic_day(cfg.params_for(stock, day),
                                             [args.seed, 0x5EED, si, di])
            write_episode_csv(episode, out / episode_filename(stock.stock_id, day))
    print(f"wrote {len(cfg.stocks) * len(cfg.days)} episodes to {out}")
    return 0


def _load_universe(data_dir: str) -> tuple[dict, list[str]]:
    pairs = list_dataset_episodes(data_dir)
    if not pairs:
        raise CliError(f"no episode CSVs found in {data_dir}")
    days = sorted({day for _, day in pairs})
    universe: dict[str, list] = {day: [] for day in days}
    for stock, day in sorted(pairs):
        universe[day].append(load_dataset_episode(data_dir, stock, day))
    return universe, days


def _train(args) -> int:
    cfg = train_config_from(load_config(args.config))
    universe, days = _load_universe(args.data)
    if cfg.eval_day_count >= len(days):
        raise CliError(
            f"eval_day_count {cfg.eval_day_count} needs fewer than {len(days)} total days"
        )
    train_days = days[: len(days) - cfg.eval_day_count]
    eval_days = days[len(days) - cfg.eval_day_count :]
    model = build_model(cfg.agent, cfg.encoder, cfg.head, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = print if args.verbose else None
    result = train(universe, train_days, eval_days, model, cfg.ppo,
                   window=cfg.window, seed=args.seed, out_dir=out, log_fn=log)
    summary = {
        "rounds": len(result.curve),
        "train_days": len(train_days),
        "eval_days": len(eval_days),
        "best_round": result.best_round,
        "best_eval_pnl_bps": result.best_eval_pnl,
        "final_eval": result.final_eval,
        "checkpoints": {"best": str(out / "best.ckpt"), "final": str(out / "final.ckpt")},
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _build_schedules(schedule: str, episodes, universe_by_day, days) -> list:
    if schedule == "twap":
        return [em.twap_schedule(ep.spec.horizon_T) for ep in episodes]
    schedules = []
    day_index = {d: i for i, d in enumerate(days)}
    for ep in episodes:
        di = day_index[ep.spec.trading_day]
        history = []
        for prior in days[max(0, di - 21) : di]:
            for other in universe_by_day[prior]:
                if other.spec.stock_id == ep.spec.stock_id:
                    history.append(em.interval_volume_curve(other))
        if history:
            schedules.append(em.vwap_schedule(history))
        else:
            schedules.append(em.twap_schedule(ep.spec.horizon_T))
    return schedules


def _backtest(args) -> int:
    universe, days = _load_universe(args.data)
    episodes = [ep for day in days for ep in universe[day]]
    window = args.window  # baseline strategies never read the snapshot window
    decisions_fh = None
    try:
        if args.strategy == "market":
            strategy = em.MarketOrderStrategy()
        elif args.strategy.startswith("limit:"):
            strategy = em.FixedOffsetStrategy(int(args.strategy.split(":", 1)[1]))
        elif args.strategy == "policy":
            if not args.checkpoint:
                raise CliError("--strategy policy needs --checkpoint")
            model = model_from_checkpoint(args.checkpoint)
            sink = None
            if args.decisions:
                decisions_fh = open(args.decisions, "w", encoding="utf-8")

                def sink(stock, day, decision):
                    row = {"stock_id": stock, "trading_day": day, **decision.to_json_dict()}
                    decisions_fh.write(json.dumps(row, sort_keys=True) + "\n")

            strategy = PolicyStrategy(model, decision_sink=sink)
            window = model.net.encoder_cfg.window
        else:
            raise CliError(
                f"unknown strategy {args.strategy!r}; use market, limit:<ticks> or policy"
            )
        schedules = _build_schedules(args.schedule, episodes, universe, days)
        results = em.run_strategy(strategy, episodes, schedules, window=window, seed=args.seed)
    finally:
        if decisions_fh is not None:
            decisions_fh.close()
    if not results:
        raise CliError("no episodes could be evaluated")
    report = {
        "strategy": args.strategy,
        "schedule": args.schedule,
        "seed": args.seed,
        "n_episodes": len(results),
        "metrics": em.compute_metrics(results).to_json_dict() if len(results) >= 2 else None,
        "episodes": [r.to_json_dict() for r in results],
    }
    Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n",
                                 encoding="utf-8")
    print(f"wrote report for {len(results)} episodes to {args.report}")
    return 0


def _format_metrics_md(rows: list[tuple[str, dict]]) -> str:
    header = "| group | n | Return (bps) | Std | t-value | PnL (bps) |"
    sep = "|---|---|---|---|---|---|"
    lines = [header, sep]
    for name, m in rows:
        lines.append(
            f"| {name} | {m['n']} | {m['return_bps']:.4f} | {m['std_bps']:.4f} "
            f"| {m['t_value']:.4f} | {m['pnl_bps']:.4f} |"
        )
    return "\n".join(lines)


def _report(args) -> int:
    raw = json.loads(Path(args.infile).read_text(encoding="utf-8"))
    results = [
        em.EpisodeResult(
            stock_id=e["stock_id"],
            trading_day=e["trading_day"],
            excess_return_bps=e["excess_return_bps"],
            cancellation_violation=e["cancellation_violation"],
            band=e["band"],
            close_price=e["close_price"],
            reward_bps=e["reward_bps"],
        )
        for e in raw["episodes"]
    ]
    rows: list[tuple[str, dict]] = []
    if len(results) >= 2:
        rows.append(("all", em.compute_metrics(results).to_json_dict()))
    if args.group_by == "price-band":
        reports, omitted = em.grouping_report(results)
        for band, rep in reports.items():
            rows.append((band, rep.to_json_dict()))
        for band, count in omitted.items():
            print(f"note: band {band!r} omitted ({count} episode)", file=sys.stderr)
    if not rows:
        raise CliError("too few episodes to report metrics")
    if args.format == "json":
        print(json.dumps({name: m for name, m in rows}, indent=2, sort_keys=True))
    elif args.format == "csv":
        cols = ["group", "n", "return_bps", "std_bps", "t_value", "pnl_bps"]
        print(",".join(cols))
        for name, m in rows:
            print(",".join([name] + [repr(m[c]) if isinstance(m[c], float) else str(m[c])
                                     for c in cols[1:]]))
    else:
        print(_format_metrics_md(rows))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="halop",
                                     description="Limit-order execution: data, training, backtests")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="write a synthetic universe as episode CSVs")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(fn=_generate_data)

    t = sub.add_parser("train", help="train a policy on a dataset directory")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(fn=_train)

    b = sub.add_parser("backtest", help="run a strategy over a dataset")
    b.add_argument("--checkpoint", default=None)
    b.add_argument("--strategy", required=True,
                   help="market | limit:<ticks> | policy (with --checkpoint)")
    b.add_argument("--schedule", choices=("twap", "vwap"), default="twap")
    b.add_argument("--data", required=True)
    b.add_argument("--report", required=True)
    b.add_argument("--decisions", default=None,
                   help="optional JSONL audit log of per-step policy decisions")
    b.add_argument("--window", type=int, default=1,
                   help="snapshot window for baseline strategies (policy uses its own)")
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(fn=_backtest)

    r = sub.add_parser("report", help="format a backtest report")
    r.add_argument("--in", dest="infile", required=True)
    r.add_argument("--group-by", choices=("price-band",), default=None)
    r.add_argument("--format", choices=("json", "csv", "md"), default="md")
    r.set_defaults(fn=_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:
        # argparse already printed usage; still emit the machine-readable line
        if exc.code not in (0, None):
            print(json.dumps({"error": {"type": "usage", "message": "invalid arguments"}}),
                  file=sys.stderr)
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001 - boundary: everything becomes an error object
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
