"""End-to-end tests of the command line, including bit-level determinism."""

import json
from pathlib import Path

import pytest
import yaml

from halop.cli import main

DATA_CONFIG = {
    "stocks": [
        {"stock_id": "LOW0", "base_price": 5.0},
        {"stock_id": "MED0", "base_price": 18.0},
    ],
    "days": {"start": "20210104", "count": 4},
    "synth": {
        "horizon_T": 12,
        "step_seconds": 12.0,
        "snapshot_interval_s": 3.0,
        "warmup_snapshots": 4,
        "volatility": 0.8,
        "mean_reversion": 0.1,
        "drift_ticks": 0.02,
        "total_shares": 10_000,
    },
}

TRAIN_CONFIG = {
    "window": 4,
    "eval_day_count": 1,
    "agent": {"variant": "halop", "m_floor": 4, "m_cap": 6, "pct_span": 0.004,
              "estimator": "exact"},
    "encoder": {"n_features": 21, "window": 4, "channels": [4], "kernel": 3,
                "stride": 2, "attn_heads": 2, "out_dim": 6},
    "head": {"hidden": 8},
    "ppo": {"rounds": 2, "eval_every": 1, "minibatch": 16},
}


def write_yaml(path: Path, payload: dict) -> str:
    path.write_text(yaml.safe_dump(payload))
    return str(path)


def dataset_bytes(path: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


@pytest.fixture
def dataset(tmp_path):
    cfg = write_yaml(tmp_path / "data.yaml", DATA_CONFIG)
    out = tmp_path / "data"
    assert main(["generate-data", "--config", cfg, "--out", str(out), "--seed", "7"]) == 0
    return out


class TestGenerateData:
    def test_layout(self, dataset):
        names = sorted(p.name for p in dataset.iterdir())
        assert "meta.json" in names
        assert "LOW0_20210104.csv" in names
        assert len([n for n in names if n.endswith(".csv")]) == 8
        meta = json.loads((dataset / "meta.json").read_text())
        assert meta["horizon_T"] == 12

    def test_bit_identical_reruns(self, tmp_path, dataset):
        cfg = write_yaml(tmp_path / "data2.yaml", DATA_CONFIG)
        out2 = tmp_path / "data2"
        assert main(["generate-data", "--config", cfg, "--out", str(out2), "--seed", "7"]) == 0
        assert dataset_bytes(dataset) == dataset_bytes(out2)

    def test_different_seed_differs(self, tmp_path, dataset):
        cfg = write_yaml(tmp_path / "data3.yaml", DATA_CONFIG)
        out3 = tmp_path / "data3"
        assert main(["generate-data", "--config", cfg, "--out", str(out3), "--seed", "8"]) == 0
        a = dataset_bytes(dataset)
        b = dataset_bytes(out3)
        assert any(a[k] != b[k] for k in a if k.endswith(".csv"))


class TestTrain:
    def test_train_writes_artifacts_and_is_deterministic(self, tmp_path, dataset):
        cfg = write_yaml(tmp_path / "train.yaml", TRAIN_CONFIG)
        outs = []
        for name in ("run1", "run2"):
            out = tmp_path / name
            assert main(["train", "--config", cfg, "--data", str(dataset),
                         "--out", str(out), "--seed", "3"]) == 0
            assert (out / "best.ckpt").exists()
            assert (out / "final.ckpt").exists()
            assert (out / "learning_curve.csv").exists()
            outs.append(out)
        for fname in ("best.ckpt", "final.ckpt", "learning_curve.csv"):
            assert (outs[0] / fname).read_bytes() == (outs[1] / fname).read_bytes()
        summaries = [json.loads((o / "summary.json").read_text()) for o in outs]
        for s in summaries:
            s.pop("checkpoints")  # embeds the (different) output paths
        assert summaries[0] == summaries[1]

    def test_eval_day_count_validation(self, tmp_path, dataset):
        bad = dict(TRAIN_CONFIG)
        bad["eval_day_count"] = 99
        cfg = write_yaml(tmp_path / "bad.yaml", bad)
        rc = main(["train", "--config", cfg, "--data", str(dataset),
                   "--out", str(tmp_path / "x"), "--seed", "0"])
        assert rc != 0


class TestBacktestAndReport:
    def test_market_strategy_report(self, tmp_path, dataset, capsys):
        report = tmp_path / "mkt.json"
        assert main(["backtest", "--strategy", "market", "--schedule", "twap",
                     "--data", str(dataset), "--report", str(report), "--seed", "1"]) == 0
        payload = json.loads(report.read_text())
        assert payload["n_episodes"] == 8
        assert abs(payload["metrics"]["return_bps"]) < 1e-9
        assert abs(payload["metrics"]["pnl_bps"]) < 1e-9

    def test_backtest_bit_identical(self, tmp_path, dataset):
        reports = []
        for name in ("a.json", "b.json"):
            path = tmp_path / name
            assert main(["backtest", "--strategy", "limit:-1", "--data", str(dataset),
                         "--report", str(path), "--seed", "5"]) == 0
            reports.append(path.read_bytes())
        assert reports[0] == reports[1]

    def test_vwap_schedule_runs(self, tmp_path, dataset):
        report = tmp_path / "vwap.json"
        assert main(["backtest", "--strategy", "market", "--schedule", "vwap",
                     "--data", str(dataset), "--report", str(report), "--seed", "1"]) == 0
        payload = json.loads(report.read_text())
        assert payload["schedule"] == "vwap"

    def test_policy_backtest_with_decisions_log(self, tmp_path, dataset):
        cfg = write_yaml(tmp_path / "train.yaml", TRAIN_CONFIG)
        run = tmp_path / "run"
        assert main(["train", "--config", cfg, "--data", str(dataset),
                     "--out", str(run), "--seed", "3"]) == 0
        report = tmp_path / "pol.json"
        decisions = tmp_path / "decisions.jsonl"
        assert main(["backtest", "--strategy", "policy", "--checkpoint",
                     str(run / "best.ckpt"), "--data", str(dataset),
                     "--report", str(report), "--decisions", str(decisions),
                     "--seed", "2"]) == 0
        lines = decisions.read_text().splitlines()
        assert len(lines) == 8 * 12  # episodes x steps
        row = json.loads(lines[0])
        assert {"stock_id", "step_t", "limit_price_ticks", "stage1_params"} <= set(row)

    def test_report_formats(self, tmp_path, dataset, capsys):
        report = tmp_path / "r.json"
        main(["backtest", "--strategy", "market", "--data", str(dataset),
              "--report", str(report), "--seed", "1"])
        assert main(["report", "--in", str(report), "--format", "md",
                     "--group-by", "price-band"]) == 0
        md = capsys.readouterr().out
        assert "| all |" in md
        assert main(["report", "--in", str(report), "--format", "json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert "all" in payload
        assert main(["report", "--in", str(report), "--format", "csv"]) == 0
        assert capsys.readouterr().out.startswith("group,")


class TestErrors:
    def test_unknown_strategy_is_json_error(self, tmp_path, dataset, capsys):
        rc = main(["backtest", "--strategy", "bogus", "--data", str(dataset),
                   "--report", str(tmp_path / "x.json")])
        assert rc == 1
        err = capsys.readouterr().err
        payload = json.loads(err.strip().splitlines()[-1])
        assert payload["error"]["type"] == "CliError"

    def test_missing_data_dir(self, tmp_path, capsys):
        rc = main(["backtest", "--strategy", "market", "--data", str(tmp_path / "none"),
                   "--report", str(tmp_path / "x.json")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_usage_error_nonzero(self, capsys):
        rc = main(["backtest"])  # missing required args
        assert rc != 0
        assert "error" in capsys.readouterr().err
