"""Policy models: the two-stage hybrid policy and its single-stage baselines.

Each model wraps one :class:`ExecutionNet` and exposes two paths:

* ``act_batch``: sample actions for a batch of concurrent episodes during
  rollout, recording everything a later update needs (including the frozen
  sample seed of the stage-1 estimator so old log-probs can be reproduced
  exactly);
* ``evaluate``: rebuild the batch's log-probs/entropies/values as graph
  tensors under the current parameters for the clipped-surrogate update.
  Distribution terms enter the graph through their closed-form d/d(mu),
  d/d(sigma) at the evaluation point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import policy_dist as dist
from ..halop_agent import (
    HalopDecision,
    Stage1ActionSpace,
    Stage2ActionSpace,
    build_stage1_grid_ticks,
    default_half_width,
    stage1_act,
    stage2_act,
)
from ..lob_core import Order
from ..nets import EncoderConfig, ExecutionNet, HeadConfig, Tensor, constant, linearized

__all__ = [
    "AgentConfig",
    "StepObs",
    "StepSample",
    "Trajectory",
    "EvalTensors",
    "PolicyModel",
    "build_model",
    "model_from_checkpoint",
]


@dataclass(frozen=True)
class AgentConfig:
    """Action-mechanism knobs shared by rollout and update."""

    variant: str = "halop"
    stage2_halfwidth: int = 3
    pct_span: float = 0.01
    m_floor: int = 10
    m_cap: int = 200
    estimator: str = "sampled"  # stage-1 training estimator; eval always exact
    n_samples: int = 16
    softmax_halfwidth: int = 10

    def n_logits(self) -> int:
        return 2 * self.softmax_halfwidth + 1


@dataclass(frozen=True)
class StepObs:
    """What a policy sees for one episode at one step."""

    window: np.ndarray
    private: np.ndarray
    price_ticks: int
    step_t: int
    sample_seed: tuple[int, ...]


@dataclass(frozen=True)
class StepSample:
    """One trajectory step with the action payload needed to re-evaluate it."""

    window: np.ndarray
    private: np.ndarray
    price_ticks: int
    logp_old: float
    values: tuple[float, ...]
    payload: object


@dataclass
class Trajectory:
    stock_id: str
    trading_day: str
    steps: list[StepSample] = field(default_factory=list)
    reward_bps: float = 0.0
    settlement: object = None

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class _HalopPayload:
    grid_lo: int
    grid_hi: int
    index_s1: int
    offset_s2: int
    sample_seed: tuple[int, ...]


@dataclass(frozen=True)
class _DiscretePayload:
    grid_lo: int
    grid_hi: int
    index: int
    sample_seed: tuple[int, ...]


@dataclass(frozen=True)
class _GaussianPayload:
    a_pct: float


@dataclass(frozen=True)
class _SoftmaxPayload:
    index: int


@dataclass
class EvalTensors:
    logp: Tensor
    entropy: Tensor
    values: list[Tensor]


class PolicyModel:
    """One trainable policy (network + action mechanism) over episodes."""

    def __init__(self, net: ExecutionNet, agent_cfg: AgentConfig):
        if net.variant != agent_cfg.variant:
            raise ValueError(f"net variant {net.variant} != agent variant {agent_cfg.variant}")
        self.net = net
        self.cfg = agent_cfg

    @property
    def store(self):
        return self.net.store

    # -- helpers ---------------------------------------------------------------

    def _grid_for(self, price_ticks: int) -> Stage1ActionSpace:
        m = default_half_width(price_ticks, self.cfg.pct_span, self.cfg.m_floor, self.cfg.m_cap)
        return build_stage1_grid_ticks(price_ticks, m)

    def _stage1_estimator(self, train_mode: bool) -> str:
        return self.cfg.estimator if train_mode else "exact"

    # -- rollout ---------------------------------------------------------------

    def act_batch(
        self,
        observations: list[StepObs],
        rngs: list[np.random.Generator],
        train_mode: bool = True,
    ) -> tuple[list[int], list[StepSample], list[HalopDecision] | None]:
        """Sample one action per live episode.

        Returns the chosen limit price (ticks) per episode, the trajectory
        samples, and for the two-stage variant the full decisions (for audit
        logging).
        """
        windows = np.stack([o.window for o in observations])
        privates = np.stack([o.private for o in observations])
        rep = self.net.encode(windows)
        variant = self.cfg.variant
        limit_prices: list[int] = []
        samples: list[StepSample] = []
        decisions: list[HalopDecision] | None = [] if variant == "halop" else None

        if variant == "halop":
            mu1, s1 = self.net.actor_head(1, rep)
            mu2, s2 = self.net.actor_head(2, rep, privates)
            v1 = self.net.critic_head(1, rep).data
            v2 = self.net.critic_head(2, rep, privates).data
            space2 = Stage2ActionSpace(self.cfg.stage2_halfwidth)
            estimator = self._stage1_estimator(train_mode)
            for i, obs in enumerate(observations):
                grid = self._grid_for(obs.price_ticks)
                p1 = dist.GaussianParams(float(mu1.data[i]), float(s1.data[i]))
                a1 = stage1_act(
                    grid, p1, rngs[i], estimator=estimator,
                    n_samples=self.cfg.n_samples, sample_seed=list(obs.sample_seed),
                )
                p2 = dist.GaussianParams(float(mu2.data[i]), float(s2.data[i]))
                a2 = stage2_act(a1.a_ticks, space2, p2, rngs[i], obs.price_ticks)
                decision = HalopDecision(
                    step_t=obs.step_t,
                    current_price_ticks=obs.price_ticks,
                    grid_lo=int(grid.tick_offsets[0]),
                    grid_hi=int(grid.tick_offsets[-1]),
                    index_s1=a1.index,
                    a_pct_s1=a1.a_pct,
                    a_ticks_s1=a1.a_ticks,
                    a_s2=a2.offset,
                    a_ticks_final=a2.a_ticks_final,
                    limit_price_ticks=a2.limit_price_ticks,
                    clamped=a2.clamped,
                    log_prob_s1=a1.log_prob,
                    log_prob_s2=a2.log_prob,
                    mu1=p1.mu, sigma1=p1.sigma, mu2=p2.mu, sigma2=p2.sigma,
                    sample_seed=None,
                )
                decisions.append(decision)
                limit_prices.append(a2.limit_price_ticks)
                samples.append(StepSample(
                    window=obs.window,
                    private=obs.private,
                    price_ticks=obs.price_ticks,
                    logp_old=a1.log_prob + a2.log_prob,
                    values=(float(v1[i]), float(v2[i])),
                    payload=_HalopPayload(
                        grid_lo=int(grid.tick_offsets[0]),
                        grid_hi=int(grid.tick_offsets[-1]),
                        index_s1=a1.index,
                        offset_s2=a2.offset,
                        sample_seed=obs.sample_seed,
                    ),
                ))
        elif variant == "stage1":
            mu, s = self.net.actor_head(1, rep, privates)
            v = self.net.critic_head(1, rep, privates).data
            estimator = self._stage1_estimator(train_mode)
            for i, obs in enumerate(observations):
                grid = self._grid_for(obs.price_ticks)
                p1 = dist.GaussianParams(float(mu.data[i]), float(s.data[i]))
                a1 = stage1_act(
                    grid, p1, rngs[i], estimator=estimator,
                    n_samples=self.cfg.n_samples, sample_seed=list(obs.sample_seed),
                )
                limit_prices.append(max(obs.price_ticks + a1.a_ticks, 1))
                samples.append(StepSample(
                    window=obs.window, private=obs.private, price_ticks=obs.price_ticks,
                    logp_old=a1.log_prob, values=(float(v[i]),),
                    payload=_DiscretePayload(
                        grid_lo=int(grid.tick_offsets[0]),
                        grid_hi=int(grid.tick_offsets[-1]),
                        index=a1.index,
                        sample_seed=obs.sample_seed,
                    ),
                ))
        elif variant == "gaussian":
            mu, s = self.net.actor_head(1, rep, privates)
            v = self.net.critic_head(1, rep, privates).data
            for i, obs in enumerate(observations):
                p1 = dist.GaussianParams(float(mu.data[i]), float(s.data[i]))
                a_pct = dist.gaussian_sample(p1, rngs[i])
                ticks = int(math.floor(a_pct * obs.price_ticks + 0.5)) if a_pct >= 0 else int(
                    math.ceil(a_pct * obs.price_ticks - 0.5)
                )
                limit_prices.append(max(obs.price_ticks + ticks, 1))
                samples.append(StepSample(
                    window=obs.window, private=obs.private, price_ticks=obs.price_ticks,
                    logp_old=dist.gaussian_log_pdf(a_pct, p1), values=(float(v[i]),),
                    payload=_GaussianPayload(a_pct=a_pct),
                ))
        elif variant == "softmax":
            logits = self.net.logits_head(rep, privates).data
            v = self.net.critic_head(1, rep, privates).data
            m = self.cfg.softmax_halfwidth
            for i, obs in enumerate(observations):
                row = logits[i] - logits[i].max()
                probs = np.exp(row)
                probs /= probs.sum()
                k = dist.sample(probs, rngs[i])
                limit_prices.append(max(obs.price_ticks + (k - m), 1))
                samples.append(StepSample(
                    window=obs.window, private=obs.private, price_ticks=obs.price_ticks,
                    logp_old=dist.log_prob(probs, k), values=(float(v[i]),),
                    payload=_SoftmaxPayload(index=k),
                ))
        else:
            raise ValueError(f"unknown variant {variant!r}")
        return limit_prices, samples, decisions

    # -- update-time re-evaluation ----------------------------------------------

    def evaluate(self, samples: list[StepSample], train_mode: bool = True) -> EvalTensors:
        windows = np.stack([s.window for s in samples])
        privates = np.stack([s.private for s in samples])
        rep = self.net.encode(windows)
        variant = self.cfg.variant

        if variant == "halop":
            mu1, s1 = self.net.actor_head(1, rep)
            mu2, s2 = self.net.actor_head(2, rep, privates)
            values = [self.net.critic_head(1, rep), self.net.critic_head(2, rep, privates)]
            logp1, dmu1, ds1 = np.empty(len(samples)), np.empty(len(samples)), np.empty(len(samples))
            ent1, emu1, es1 = np.empty(len(samples)), np.empty(len(samples)), np.empty(len(samples))
            logp2, dmu2, ds2 = np.zeros(len(samples)), np.zeros(len(samples)), np.zeros(len(samples))
            ent2, emu2, es2 = np.zeros(len(samples)), np.zeros(len(samples)), np.zeros(len(samples))
            offsets2 = Stage2ActionSpace(self.cfg.stage2_halfwidth).offsets.astype(np.float64)
            estimator = self._stage1_estimator(train_mode)
            for i, s in enumerate(samples):
                pay: _HalopPayload = s.payload
                grid = np.arange(pay.grid_lo, pay.grid_hi + 1) / float(s.price_ticks)
                p1 = dist.GaussianParams(float(mu1.data[i]), float(s1.data[i]))
                d1 = self._stage1_dist(grid, p1, pay.sample_seed, estimator)
                logp1[i] = dist.log_prob(d1.probs, pay.index_s1)
                dmu1[i], ds1[i] = d1.log_prob_grad(pay.index_s1)
                ent1[i] = dist.entropy(d1.probs)
                emu1[i], es1[i] = d1.entropy_grad()
                if offsets2.size > 1:
                    p2 = dist.GaussianParams(float(mu2.data[i]), float(s2.data[i]))
                    d2 = dist.gsoftmax_with_grads(offsets2, p2)
                    k2 = pay.offset_s2 + self.cfg.stage2_halfwidth
                    logp2[i] = dist.log_prob(d2.probs, k2)
                    dmu2[i], ds2[i] = d2.log_prob_grad(k2)
                    ent2[i] = dist.entropy(d2.probs)
                    emu2[i], es2[i] = d2.entropy_grad()
            logp = linearized(logp1, [mu1, s1], [dmu1, ds1]) + linearized(
                logp2, [mu2, s2], [dmu2, ds2]
            )
            entropy = linearized(ent1, [mu1, s1], [emu1, es1]) + linearized(
                ent2, [mu2, s2], [emu2, es2]
            )
            return EvalTensors(logp, entropy, values)

        if variant == "stage1":
            mu, sg = self.net.actor_head(1, rep, privates)
            values = [self.net.critic_head(1, rep, privates)]
            n = len(samples)
            lp, dmu, dsg = np.empty(n), np.empty(n), np.empty(n)
            ent, emu, esg = np.empty(n), np.empty(n), np.empty(n)
            estimator = self._stage1_estimator(train_mode)
            for i, s in enumerate(samples):
                pay: _DiscretePayload = s.payload
                grid = np.arange(pay.grid_lo, pay.grid_hi + 1) / float(s.price_ticks)
                p1 = dist.GaussianParams(float(mu.data[i]), float(sg.data[i]))
                d1 = self._stage1_dist(grid, p1, pay.sample_seed, estimator)
                lp[i] = dist.log_prob(d1.probs, pay.index)
                dmu[i], dsg[i] = d1.log_prob_grad(pay.index)
                ent[i] = dist.entropy(d1.probs)
                emu[i], esg[i] = d1.entropy_grad()
            return EvalTensors(
                linearized(lp, [mu, sg], [dmu, dsg]),
                linearized(ent, [mu, sg], [emu, esg]),
                values,
            )

        if variant == "gaussian":
            mu, sg = self.net.actor_head(1, rep, privates)
            values = [self.net.critic_head(1, rep, privates)]
            n = len(samples)
            lp, dmu, dsg = np.empty(n), np.empty(n), np.empty(n)
            ent, emu, esg = np.empty(n), np.empty(n), np.empty(n)
            for i, s in enumerate(samples):
                pay: _GaussianPayload = s.payload
                p1 = dist.GaussianParams(float(mu.data[i]), float(sg.data[i]))
                lp[i] = dist.gaussian_log_pdf(pay.a_pct, p1)
                dmu[i], dsg[i] = dist.gaussian_log_pdf_grads(pay.a_pct, p1)
                ent[i] = dist.gaussian_entropy(p1)
                emu[i], esg[i] = 0.0, 1.0 / p1.sigma
            return EvalTensors(
                linearized(lp, [mu, sg], [dmu, dsg]),
                linearized(ent, [mu, sg], [emu, esg]),
                values,
            )

        if variant == "softmax":
            logits = self.net.logits_head(rep, privates)
            values = [self.net.critic_head(1, rep, privates)]
            probs = logits.softmax(axis=-1)
            onehot = np.zeros(probs.shape)
            for i, s in enumerate(samples):
                onehot[i, s.payload.index] = 1.0
            logp = (probs * constant(onehot)).sum(axis=-1).log()
            entropy = -(probs * probs.log()).sum(axis=-1)
            return EvalTensors(logp, entropy, values)

        raise ValueError(f"unknown variant {variant!r}")

    def _stage1_dist(self, grid, params, sample_seed, estimator) -> dist.DistWithGrads:
        if estimator == "sampled":
            uniforms = dist.sampling_uniforms(len(grid), self.cfg.n_samples, list(sample_seed))
            return dist.disc_gaussian_sampled_with_grads(grid, params, uniforms)
        return dist.disc_gaussian_exact_with_grads(grid, params)

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        from dataclasses import asdict

        from ..nets import save_checkpoint

        config = self.net.config_dict()
        config["agent"] = asdict(self.cfg)
        save_checkpoint(path, config, dict(self.net.store.items()))


def build_model(
    agent_cfg: AgentConfig,
    encoder_cfg: EncoderConfig,
    head_cfg: HeadConfig,
    seed: int,
) -> PolicyModel:
    n_logits = agent_cfg.n_logits() if agent_cfg.variant == "softmax" else None
    net = ExecutionNet(encoder_cfg, head_cfg, variant=agent_cfg.variant,
                       n_logits=n_logits, seed=seed)
    return PolicyModel(net, agent_cfg)


def model_from_checkpoint(path) -> PolicyModel:
    from ..nets import load_checkpoint
    from ..nets.model import EncoderConfig as _Enc, HeadConfig as _Head

    config, arrays = load_checkpoint(path)
    enc = dict(config["encoder"])
    enc["channels"] = tuple(enc["channels"])
    net = ExecutionNet(
        _Enc(**enc), _Head(**config["head"]),
        variant=config["variant"], n_logits=config["n_logits"], seed=config["seed"],
    )
    for name, arr in arrays.items():
        net.store[name].data = arr
    agent_cfg = AgentConfig(**config["agent"]) if "agent" in config else AgentConfig(
        variant=net.variant
    )
    return PolicyModel(net, agent_cfg)


def make_order(step_t: int, volume: float, limit_price_ticks: int) -> Order:
    return Order(step_t=step_t, kind="limit", volume=volume, limit_price_ticks=limit_price_ticks)


class PolicyStrategy:
    """Adapter exposing a trained policy through the backtest Strategy
    protocol (one forward per step); optionally logs full decisions."""

    def __init__(self, model: PolicyModel, decision_sink=None):
        self.model = model
        self.decision_sink = decision_sink

    def act(self, sim, pub, state, rng) -> Order:
        obs = StepObs(
            window=pub.standardized,
            private=state.private_vector(),
            price_ticks=sim.current_price_ticks(),
            step_t=state.t,
            sample_seed=(0, state.t),
        )
        limits, _, decisions = self.model.act_batch([obs], [rng], train_mode=False)
        if self.decision_sink is not None and decisions is not None:
            self.decision_sink(sim.episode.spec.stock_id, sim.episode.spec.trading_day,
                               decisions[0])
        return Order(step_t=state.t, kind="limit", volume=sim.catch_up_volume(),
                     limit_price_ticks=limits[0])
