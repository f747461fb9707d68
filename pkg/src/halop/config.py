"""YAML/JSON configuration for the command-line workflows.

Two documents drive the CLI: a data config (synthetic universe layout) and a
training config (network, agent, PPO and data-split settings).  Every knob
has a default, so configs only need the keys they change.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .lob_core import SynthParams
from .nets import EncoderConfig, HeadConfig
from .ppo_trainer import AgentConfig, PpoConfig

__all__ = [
    "DataConfig",
    "TrainConfig",
    "load_config",
    "data_config_from",
    "train_config_from",
    "trading_days",
]


def load_config(path: str | Path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    loaded = yaml.safe_load(text)
    if not isinstance(loaded, dict):
        raise ValueError(f"config {path} must be a mapping at top level")
    return loaded


def _dataclass_from(cls, mapping: dict, context: str):
    known = {f.name for f in fields(cls)}
    unknown = set(mapping) - known
    if unknown:
        raise ValueError(f"unknown {context} keys: {sorted(unknown)}")
    return cls(**mapping)


def trading_days(start: str, count: int) -> list[str]:
    """``count`` consecutive business days starting at YYYYMMDD ``start``."""
    day = _dt.datetime.strptime(start, "%Y%m%d").date()
    out: list[str] = []
    while len(out) < count:
        if day.weekday() < 5:
            out.append(day.strftime("%Y%m%d"))
        day += _dt.timedelta(days=1)
    return out


@dataclass(frozen=True)
class StockSpec:
    stock_id: str
    base_price: float


@dataclass(frozen=True)
class DataConfig:
    """Synthetic universe: which stocks, which days, which dynamics."""

    stocks: tuple[StockSpec, ...]
    days: tuple[str, ...]
    synth: SynthParams

    def params_for(self, stock: StockSpec, day: str) -> SynthParams:
        return replace(self.synth, stock_id=stock.stock_id,
                       base_price=stock.base_price, trading_day=day)

    def meta(self) -> dict:
        s = self.synth
        return {
            "tick_size": s.tick_size,
            "horizon_T": s.horizon_T,
            "step_seconds": s.step_seconds,
            "direction": s.direction,
            "latency_seconds": s.latency_seconds,
            "order_cap": s.order_cap,
            "total_shares": s.total_shares,
            "snapshot_interval_s": s.snapshot_interval_s,
            "stocks": [asdict(st) for st in self.stocks],
            "days": list(self.days),
        }


def data_config_from(raw: dict) -> DataConfig:
    raw = dict(raw)
    stocks_raw = raw.pop("stocks", None)
    if not stocks_raw:
        raise ValueError("data config needs a 'stocks' list of {stock_id, base_price}")
    stocks = tuple(_dataclass_from(StockSpec, s, "stock") for s in stocks_raw)
    days_raw = raw.pop("days", None)
    if isinstance(days_raw, dict):
        days = tuple(trading_days(str(days_raw["start"]), int(days_raw["count"])))
    elif isinstance(days_raw, list):
        days = tuple(str(d) for d in days_raw)
    else:
        raise ValueError("data config needs 'days': either a list or {start, count}")
    synth_raw = raw.pop("synth", {})
    if raw:
        raise ValueError(f"unknown data config keys: {sorted(raw)}")
    synth = _dataclass_from(SynthParams, synth_raw, "synth")
    return DataConfig(stocks=stocks, days=days, synth=synth)


@dataclass(frozen=True)
class TrainConfig:
    """Everything the train command needs besides the dataset and seed."""

    window: int = 8
    eval_day_count: int = 10
    schedule: str = "twap"
    agent: AgentConfig = field(default_factory=AgentConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    head: HeadConfig = field(default_factory=HeadConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)


def train_config_from(raw: dict) -> TrainConfig:
    raw = dict(raw)
    agent = _dataclass_from(AgentConfig, raw.pop("agent", {}), "agent")
    enc_raw = dict(raw.pop("encoder", {}))
    if "channels" in enc_raw:
        enc_raw["channels"] = tuple(enc_raw["channels"])
    encoder = _dataclass_from(EncoderConfig, enc_raw, "encoder")
    head = _dataclass_from(HeadConfig, raw.pop("head", {}), "head")
    ppo = _dataclass_from(PpoConfig, raw.pop("ppo", {}), "ppo")
    window = int(raw.pop("window", 8))
    eval_day_count = int(raw.pop("eval_day_count", 10))
    schedule = str(raw.pop("schedule", "twap"))
    if schedule not in ("twap", "vwap"):
        raise ValueError(f"schedule must be twap or vwap, got {schedule!r}")
    if raw:
        raise ValueError(f"unknown train config keys: {sorted(raw)}")
    return TrainConfig(window=window, eval_day_count=eval_day_count, schedule=schedule,
                       agent=agent, encoder=encoder, head=head, ppo=ppo)
