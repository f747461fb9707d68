"""Two-stage hybrid action mechanism.

Stage 1 picks a coarse price offset from a discretized Gaussian over the
percentage offsets that are exactly realizable as limit prices at the
current price (one grid point per tick).  Stage 2 refines it by an integer
offset from a fixed window of 2K+1 ticks via a Gaussian-softmax policy, so
the fine action space has the same size for every stock.  The final tick
action is the sum of the two stages.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import policy_dist as dist
from .lob_core import currency_to_ticks

__all__ = [
    "Stage1ActionSpace",
    "Stage2ActionSpace",
    "Stage1Action",
    "Stage2Action",
    "HalopDecision",
    "default_half_width",
    "build_stage1_grid",
    "build_stage1_grid_ticks",
    "stage1_act",
    "stage2_act",
    "joint_log_prob",
]


@dataclass(frozen=True)
class Stage1ActionSpace:
    """Realizable percentage offsets around the current price.

    ``tick_offsets[k]`` and ``pct_grid[k]`` describe the same candidate limit
    price; the grid is truncated (and flagged) when the full half-width would
    cross zero price.
    """

    tick_offsets: np.ndarray
    pct_grid: np.ndarray
    current_price_ticks: int
    half_width: int
    truncated: bool

    @property
    def size(self) -> int:
        return int(self.tick_offsets.size)

    def index_of_offset(self, offset: int) -> int:
        return int(offset - self.tick_offsets[0])


@dataclass(frozen=True)
class Stage2ActionSpace:
    """Integer refinement offsets -K..K; always 2K+1 actions."""

    half_width: int

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.half_width, self.half_width + 1)

    @property
    def size(self) -> int:
        return 2 * self.half_width + 1


@dataclass(frozen=True)
class Stage1Action:
    index: int
    a_pct: float
    a_ticks: int
    log_prob: float


@dataclass(frozen=True)
class Stage2Action:
    offset: int
    a_ticks_final: int
    limit_price_ticks: int
    log_prob: float
    clamped: bool


@dataclass(frozen=True)
class HalopDecision:
    """Full record of one two-stage decision, serializable for audit logs."""

    step_t: int
    current_price_ticks: int
    grid_lo: int
    grid_hi: int
    index_s1: int
    a_pct_s1: float
    a_ticks_s1: int
    a_s2: int
    a_ticks_final: int
    limit_price_ticks: int
    clamped: bool
    log_prob_s1: float
    log_prob_s2: float
    mu1: float
    sigma1: float
    mu2: float
    sigma2: float
    sample_seed: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "step_t": self.step_t,
            "current_price_ticks": self.current_price_ticks,
            "grid": [self.grid_lo, self.grid_hi],
            "index_s1": self.index_s1,
            "a_pct_s1": self.a_pct_s1,
            "a_ticks_s1": self.a_ticks_s1,
            "a_s2": self.a_s2,
            "a_ticks_final": self.a_ticks_final,
            "limit_price_ticks": self.limit_price_ticks,
            "clamped": self.clamped,
            "log_prob_s1": self.log_prob_s1,
            "log_prob_s2": self.log_prob_s2,
            "stage1_params": [self.mu1, self.sigma1],
            "stage2_params": [self.mu2, self.sigma2],
            "sample_seed": self.sample_seed,
        }


def default_half_width(price_ticks: int, pct_span: float = 0.01,
                       floor: int = 10, cap: int = 200) -> int:
    """Half-width covering ``pct_span`` of the price, clamped to [floor, cap].

    Keeps the stage-1 grid comparable across price bands: high-priced stocks
    get more ticks per percent, low-priced ones keep at least ``floor``.
    """
    return int(min(max(round(price_ticks * pct_span), floor), cap))


def build_stage1_grid_ticks(price_ticks: int, half_width: int) -> Stage1ActionSpace:
    if price_ticks < 1:
        raise ValueError(f"price must be at least one tick, got {price_ticks}")
    if half_width < 1:
        raise ValueError(f"half_width must be >= 1, got {half_width}")
    lo = max(-half_width, 1 - price_ticks)  # limit prices stay >= 1 tick
    offsets = np.arange(lo, half_width + 1)
    pct = offsets / float(price_ticks)
    return Stage1ActionSpace(
        tick_offsets=offsets,
        pct_grid=pct,
        current_price_ticks=price_ticks,
        half_width=half_width,
        truncated=bool(lo > -half_width),
    )


def build_stage1_grid(current_price: float, tick_size: float, half_width: int) -> Stage1ActionSpace:
    """Grid of realizable percentage offsets for a currency price on the grid."""
    return build_stage1_grid_ticks(currency_to_ticks(current_price, tick_size), half_width)


def stage1_act(
    grid: Stage1ActionSpace,
    params: dist.GaussianParams,
    rng: np.random.Generator,
    estimator: str = "exact",
    n_samples: int = 16,
    sample_seed=None,
) -> Stage1Action:
    """Sample a coarse action from the discretized Gaussian over the grid."""
    if estimator == "exact":
        probs = dist.disc_gaussian_exact(grid.pct_grid, params)
    elif estimator == "sampled":
        uniforms = dist.sampling_uniforms(grid.size, n_samples, sample_seed)
        probs = dist.disc_gaussian_sampled(grid.pct_grid, params, n_samples, uniforms=uniforms)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    index = dist.sample(probs, rng)
    return Stage1Action(
        index=index,
        a_pct=float(grid.pct_grid[index]),
        a_ticks=int(grid.tick_offsets[index]),
        log_prob=dist.log_prob(probs, index),
    )


def stage2_act(
    a_ticks_s1: int,
    space: Stage2ActionSpace,
    params: dist.GaussianParams,
    rng: np.random.Generator,
    current_price_ticks: int,
) -> Stage2Action:
    """Sample the refinement offset and compose the final limit price.

    The composed tick action always equals stage-1 plus the offset; only the
    emitted limit price is clamped (to one tick) when the composition would
    cross zero, and the event is flagged.
    """
    if space.half_width == 0:
        offset, log_prob = 0, 0.0
    else:
        probs = dist.gsoftmax(space.offsets.astype(np.float64), params)
        index = dist.sample(probs, rng)
        offset = int(space.offsets[index])
        log_prob = dist.log_prob(probs, index)
    final = a_ticks_s1 + offset
    limit = current_price_ticks + final
    clamped = limit < 1
    return Stage2Action(
        offset=offset,
        a_ticks_final=final,
        limit_price_ticks=max(limit, 1),
        log_prob=log_prob,
        clamped=clamped,
    )


def joint_log_prob(decision: HalopDecision) -> float:
    """Log probability of the joint two-stage action (factorized policy)."""
    return decision.log_prob_s1 + decision.log_prob_s2
