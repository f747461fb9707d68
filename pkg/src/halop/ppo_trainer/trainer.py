"""On-policy training loop: day-grouped rollouts and clipped-surrogate updates.

Each training round draws one trading day, rolls out every episode of that
day in lockstep under the current policy, then runs minibatched PPO epochs
over the collected steps.  Rewards are terminal-only (settlement basis
points), so advantages come from GAE over a zero-padded reward vector.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from ..lob_core import EpisodeData, Order, VolumeSchedule
from ..market_sim import ExecutionSim
from ..nets import constant
from .gae import compute_advantages
from .models import PolicyModel, StepObs, Trajectory

__all__ = [
    "PpoConfig",
    "EpochPlan",
    "Adam",
    "rollout_day",
    "ppo_update",
    "evaluate_policy",
    "train",
    "TrainResult",
    "twap_for",
]


@dataclass(frozen=True)
class PpoConfig:
    """PPO hyperparameters; defaults follow common clipped-PPO practice."""

    clip_eps: float = 0.2
    gamma: float = 1.0
    gae_lambda: float = 0.95
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    epochs: int = 4
    minibatch: int = 256
    learning_rate: float = 3e-4
    grad_clip: float = 0.5
    rounds: int = 150
    eval_every: int = 25
    normalize_advantages: bool = True

    def validate(self) -> None:
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError(f"gae_lambda must be in [0, 1], got {self.gae_lambda}")
        if self.epochs < 1 or self.minibatch < 1 or self.rounds < 0:
            raise ValueError("epochs/minibatch must be >= 1 and rounds >= 0")


@dataclass(frozen=True)
class EpochPlan:
    """One trading day per training round, drawn ahead of time for replay."""

    days: tuple[str, ...]

    @classmethod
    def build(cls, train_days: Sequence[str], rounds: int, rng: np.random.Generator) -> "EpochPlan":
        if rounds > 0 and not train_days:
            raise ValueError("no training days available")
        days = tuple(train_days[int(rng.integers(len(train_days)))] for _ in range(rounds))
        return cls(days)


class Adam:
    """Adam on the flat parameter vector."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def twap_for(episode: EpisodeData) -> VolumeSchedule:
    T = episode.spec.horizon_T
    return VolumeSchedule(np.full(T, 1.0 / T))


def rollout_day(
    episodes: Sequence[EpisodeData],
    schedules: Sequence[VolumeSchedule],
    model: PolicyModel,
    window: int,
    seed_ctx: Sequence[int],
    train_mode: bool = True,
    decision_sink: Callable | None = None,
) -> list[Trajectory]:
    """Roll out all episodes of one day in lockstep with batched forwards.

    Each episode owns an independent RNG stream derived from ``seed_ctx`` and
    its position, so results do not depend on how the batch is composed.
    Episodes that fail validation are skipped with a warning.
    """
    if not episodes:
        return []
    horizons = {ep.spec.horizon_T for ep in episodes}
    if len(horizons) != 1:
        raise ValueError(f"episodes of one day must share a horizon, got {horizons}")
    T = horizons.pop()
    sims: list[ExecutionSim] = []
    trajs: list[Trajectory] = []
    rngs: list[np.random.Generator] = []
    pubs = []
    states = []
    kept = []
    for i, (ep, sched) in enumerate(zip(episodes, schedules)):
        try:
            sim = ExecutionSim(ep, sched, window)
            pub, state = sim.reset()
        except (ValueError, RuntimeError) as exc:
            import warnings

            warnings.warn(f"skipping episode {ep.spec.stock_id}/{ep.spec.trading_day}: {exc}")
            continue
        sims.append(sim)
        pubs.append(pub)
        states.append(state)
        trajs.append(Trajectory(ep.spec.stock_id, ep.spec.trading_day))
        rngs.append(np.random.default_rng([*seed_ctx, i]))
        kept.append(i)
    for t in range(1, T + 1):
        obs = [
            StepObs(
                window=pubs[j].standardized,
                private=states[j].private_vector(),
                price_ticks=sims[j].current_price_ticks(),
                step_t=t,
                sample_seed=(*seed_ctx, kept[j], t),
            )
            for j in range(len(sims))
        ]
        limits, samples, decisions = model.act_batch(obs, rngs, train_mode=train_mode)
        for j, sim in enumerate(sims):
            volume = sim.catch_up_volume()
            order = Order(step_t=t, kind="limit", volume=volume,
                          limit_price_ticks=limits[j])
            pubs[j], states[j], _, _ = sim.step(order)
            trajs[j].steps.append(samples[j])
            if decision_sink is not None and decisions is not None:
                decision_sink(trajs[j].stock_id, trajs[j].trading_day, decisions[j])
    for j, sim in enumerate(sims):
        report = sim.settle()
        trajs[j].reward_bps = report.reward_bps
        trajs[j].settlement = report
    return trajs


def ppo_update(
    model: PolicyModel,
    trajectories: Sequence[Trajectory],
    cfg: PpoConfig,
    adam: Adam,
    shuffle_rng: np.random.Generator,
) -> dict:
    """Minibatched clipped-surrogate epochs over one rollout batch.

    A non-finite loss aborts the update and restores the parameters from
    before the first epoch.
    """
    if not trajectories:
        raise ValueError("ppo_update needs at least one trajectory")
    samples = []
    advantages = []
    targets = []
    for traj in trajectories:
        values = np.array([s.values[-1] for s in traj.steps])
        rewards = np.zeros(len(traj.steps))
        rewards[-1] = traj.reward_bps
        adv, tgt = compute_advantages(rewards, values, cfg.gamma, cfg.gae_lambda)
        samples.extend(traj.steps)
        advantages.append(adv)
        targets.append(tgt)
    advantages = np.concatenate(advantages)
    targets = np.concatenate(targets)
    old_logp = np.array([s.logp_old for s in samples])
    if cfg.normalize_advantages and advantages.size > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    snapshot = model.store.snapshot()
    n = len(samples)
    diag = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0,
            "clip_fraction": 0.0, "approx_kl": 0.0, "aborted": False}
    passes = 0
    for _ in range(cfg.epochs):
        perm = shuffle_rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = perm[start : start + cfg.minibatch]
            batch = [samples[j] for j in idx]
            ev = model.evaluate(batch, train_mode=True)
            ratio = (ev.logp - constant(old_logp[idx])).exp()
            adv_c = constant(advantages[idx])
            surr = (ratio * adv_c).minimum(ratio.clip(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv_c)
            policy_loss = -surr.mean()
            tgt_c = constant(targets[idx])
            value_loss = None
            for v in ev.values:
                term = (v - tgt_c).square().mean()
                value_loss = term if value_loss is None else value_loss + term
            value_loss = value_loss * (1.0 / len(ev.values))
            entropy = ev.entropy.mean()
            loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
            if not math.isfinite(loss.item()):
                model.store.restore(snapshot)
                diag["aborted"] = True
                import warnings

                warnings.warn("non-finite PPO loss; update aborted and parameters restored")
                return diag
            model.store.zero_grad()
            loss.backward()
            grad = model.store.flat_grad()
            gnorm = float(np.linalg.norm(grad))
            if cfg.grad_clip > 0.0 and gnorm > cfg.grad_clip:
                grad = grad * (cfg.grad_clip / gnorm)
            model.store.set_flat(adam.step(model.store.flat(), grad))
            passes += 1
            diag["policy_loss"] += policy_loss.item()
            diag["value_loss"] += value_loss.item()
            diag["entropy"] += entropy.item()
            diag["clip_fraction"] += float(np.mean(np.abs(ratio.data - 1.0) > cfg.clip_eps))
            diag["approx_kl"] += float(np.mean(old_logp[idx] - ev.logp.data))
    for key in ("policy_loss", "value_loss", "entropy", "clip_fraction", "approx_kl"):
        diag[key] /= max(passes, 1)
    return diag


def evaluate_policy(
    universe: Mapping[str, Sequence[EpisodeData]],
    days: Sequence[str],
    model: PolicyModel,
    window: int,
    seed: int,
) -> dict:
    """Deterministic evaluation rollouts; returns Return/PnL style summary.

    Under a TWAP schedule the settlement reward equals the excess return
    over the TWAP-with-market-order benchmark, so its mean is the Return
    metric in basis points.
    """
    rewards = []
    violations = []
    for di, day in enumerate(days):
        episodes = universe[day]
        schedules = [twap_for(ep) for ep in episodes]
        trajs = rollout_day(episodes, schedules, model, window,
                            seed_ctx=(seed, 404, di), train_mode=False)
        for traj in trajs:
            rewards.append(traj.reward_bps)
            violations.append(traj.settlement.cancellation_violation)
    mean_return = float(np.mean(rewards)) if rewards else 0.0
    violation_rate = float(np.mean(violations)) if violations else 0.0
    return {
        "return_bps": mean_return,
        "pnl_bps": mean_return - 5.0 * violation_rate,
        "std_bps": float(np.std(rewards)) if rewards else 0.0,
        "n_episodes": len(rewards),
        "violation_rate": violation_rate,
    }


@dataclass
class TrainResult:
    curve: list[dict] = field(default_factory=list)
    plan: EpochPlan | None = None
    best_eval_pnl: float = -math.inf
    best_round: int = -1
    best_params: dict | None = None
    final_eval: dict | None = None


def train(
    universe: Mapping[str, Sequence[EpisodeData]],
    train_days: Sequence[str],
    eval_days: Sequence[str],
    model: PolicyModel,
    cfg: PpoConfig,
    window: int,
    seed: int,
    out_dir: str | Path | None = None,
    log_fn: Callable[[str], None] | None = None,
) -> TrainResult:
    """Alternate rollouts and updates; keep the checkpoint with best eval PnL."""
    cfg.validate()
    overlap = set(train_days) & set(eval_days)
    if overlap:
        raise ValueError(f"train and eval days overlap: {sorted(overlap)}")
    plan = EpochPlan.build(train_days, cfg.rounds, np.random.default_rng([seed, 101]))
    adam = Adam(model.store.n_params, cfg.learning_rate)
    result = TrainResult(plan=plan)

    def run_eval(round_no: int) -> dict:
        summary = evaluate_policy(universe, eval_days, model, window, seed)
        if summary["pnl_bps"] > result.best_eval_pnl:
            result.best_eval_pnl = summary["pnl_bps"]
            result.best_round = round_no
            result.best_params = model.store.snapshot()
        return summary

    if cfg.rounds == 0 and eval_days:
        result.final_eval = run_eval(-1)

    for r, day in enumerate(plan.days):
        episodes = universe[day]
        schedules = [twap_for(ep) for ep in episodes]
        trajs = rollout_day(episodes, schedules, model, window,
                            seed_ctx=(seed, 202, r), train_mode=True)
        diag = ppo_update(model, trajs, cfg, adam, np.random.default_rng([seed, 303, r]))
        row = {
            "round": r,
            "day": day,
            "mean_reward_bps": float(np.mean([t.reward_bps for t in trajs])),
            **{k: diag[k] for k in ("policy_loss", "value_loss", "entropy",
                                    "clip_fraction", "approx_kl")},
        }
        last_round = r == cfg.rounds - 1
        if eval_days and (last_round or (cfg.eval_every > 0 and (r + 1) % cfg.eval_every == 0)):
            summary = run_eval(r)
            row["eval_return_bps"] = summary["return_bps"]
            row["eval_pnl_bps"] = summary["pnl_bps"]
            if last_round:
                result.final_eval = summary
        result.curve.append(row)
        if log_fn is not None:
            msg = (f"round {r:4d} day {day} reward {row['mean_reward_bps']:8.3f} bps"
                   f" entropy {row['entropy']:.3f}")
            if "eval_return_bps" in row:
                msg += f" | eval return {row['eval_return_bps']:.3f} pnl {row['eval_pnl_bps']:.3f}"
            log_fn(msg)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        final_snapshot = model.store.snapshot()
        model.save(out_dir / "final.ckpt")
        if result.best_params is not None:
            model.store.restore(result.best_params)
            model.save(out_dir / "best.ckpt")
            model.store.restore(final_snapshot)
        else:
            model.save(out_dir / "best.ckpt")
        write_learning_curve(out_dir / "learning_curve.csv", result.curve)
    return result


def write_learning_curve(path: str | Path, curve: list[dict]) -> Path:
    path = Path(path)
    columns = ["round", "day", "mean_reward_bps", "policy_loss", "value_loss",
               "entropy", "clip_fraction", "approx_kl", "eval_return_bps", "eval_pnl_bps"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in curve:
            writer.writerow([repr(row[c]) if isinstance(row.get(c), float) else row.get(c, "")
                             for c in columns])
    return path
