"""Stochastic policy families over ordered candidate actions.

Four families share one interface of probabilities over a location grid:

* exact discretized Gaussian: cell probabilities are normal-CDF differences
  at neighbour midpoints (the reference semantics);
* sampled discretized Gaussian: a differentiable Monte-Carlo estimate of the
  same cells via averaged Gaussian density over uniform in-cell samples;
* Gaussian-softmax: softmax of the logits -(a_k - mu)^2 / (2 sigma^2);
* plain continuous Gaussian (for the continuous-control baseline).

All functions are pure; RNG state is always caller supplied.  Parameter
gradients are closed form so callers can chain them into any network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

__all__ = [
    "GaussianParams",
    "DistWithGrads",
    "validate_grid",
    "cell_bounds",
    "disc_gaussian_exact",
    "disc_gaussian_sampled",
    "gsoftmax",
    "sample",
    "log_prob",
    "entropy",
    "disc_gaussian_exact_with_grads",
    "disc_gaussian_sampled_with_grads",
    "gsoftmax_with_grads",
    "grad_log_prob",
    "sampling_uniforms",
    "gaussian_sample",
    "gaussian_log_pdf",
    "gaussian_entropy",
    "gaussian_log_pdf_grads",
]

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianParams:
    """Mean and scale of a Gaussian; the scale must be strictly positive."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


def normal_cdf(x: np.ndarray | float) -> np.ndarray | float:
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=np.float64) / _SQRT2))


def normal_pdf(x: np.ndarray | float) -> np.ndarray | float:
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def validate_grid(grid) -> np.ndarray:
    """Check an increasing location grid with at least two entries."""
    arr = np.asarray(grid, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("grid must be 1-d with at least two locations")
    if not np.all(np.diff(arr) > 0.0):
        raise ValueError("grid locations must be strictly increasing")
    return arr


def cell_bounds(grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Finite integration bounds per cell for the sampled estimator.

    Interior bounds are neighbour midpoints.  The two boundary cells extend
    to infinity in the exact semantics; the bounds returned here are their
    symmetric finite counterparts, but the estimator replaces those two
    cells with the exact tail mass (see ``disc_gaussian_sampled``).
    """
    mids = 0.5 * (grid[:-1] + grid[1:])
    lo = np.concatenate(([grid[0] - 0.5 * (grid[1] - grid[0])], mids))
    hi = np.concatenate((mids, [grid[-1] + 0.5 * (grid[-1] - grid[-2])]))
    return lo, hi


def disc_gaussian_exact(grid, params: GaussianParams) -> np.ndarray:
    """Exact cell probabilities: CDF differences at neighbour midpoints."""
    grid = validate_grid(grid)
    mids = 0.5 * (grid[:-1] + grid[1:])
    cdf = normal_cdf((mids - params.mu) / params.sigma)
    edges = np.concatenate(([0.0], cdf, [1.0]))
    return np.diff(edges)


def sampling_uniforms(m: int, n_samples: int, seed) -> np.ndarray:
    """Frozen uniform draws for a reproducible sampled estimator."""
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    return np.random.default_rng(seed).random((m, n_samples))


def _sampled_components(grid: np.ndarray, params: GaussianParams, uniforms: np.ndarray):
    """Raw (unnormalized) cell estimates and their parameter derivatives.

    Interior cells use the averaged-density Monte-Carlo estimate over
    uniform in-cell samples, which is unbiased for the midpoint integral.
    The two boundary cells are open intervals where that estimate has no
    proper definition, so they carry the exact Gaussian tail mass instead
    (still closed form in mu and sigma).
    """
    m = grid.size
    sigma = params.sigma
    lo, hi = cell_bounds(grid)
    widths = hi - lo
    points = lo[:, None] + uniforms * widths[:, None]
    z = (points - params.mu) / sigma
    dens = np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
    raw = widths * dens.mean(axis=1)
    draw_dmu = widths * (dens * z / sigma).mean(axis=1)
    draw_dsigma = widths * (dens * (z * z - 1.0) / sigma).mean(axis=1)

    z_lo = (lo[0] + widths[0] - params.mu) / sigma  # first interior midpoint
    z_hi = (hi[-1] - widths[-1] - params.mu) / sigma  # last interior midpoint
    pdf_lo, pdf_hi = normal_pdf(z_lo), normal_pdf(z_hi)
    raw[0] = normal_cdf(z_lo)
    raw[-1] = 1.0 - normal_cdf(z_hi)
    draw_dmu[0] = -pdf_lo / sigma
    draw_dmu[-1] = pdf_hi / sigma
    draw_dsigma[0] = -z_lo * pdf_lo / sigma
    draw_dsigma[-1] = z_hi * pdf_hi / sigma
    return raw, draw_dmu, draw_dsigma


def disc_gaussian_sampled(
    grid,
    params: GaussianParams,
    n_samples: int,
    rng: np.random.Generator | None = None,
    uniforms: np.ndarray | None = None,
) -> np.ndarray:
    """Monte-Carlo cell probabilities via averaged Gaussian density.

    Pass ``uniforms`` (shape ``(m, n_samples)``) to pin the sample positions;
    otherwise they are drawn from ``rng``.  The raw estimates are renormalized
    so the result is a proper distribution.
    """
    grid = validate_grid(grid)
    if uniforms is None:
        if rng is None:
            raise ValueError("provide either rng or uniforms")
        if n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {n_samples}")
        uniforms = rng.random((grid.size, n_samples))
    elif uniforms.shape[0] != grid.size:
        raise ValueError(f"uniforms rows {uniforms.shape[0]} != grid size {grid.size}")
    raw, _, _ = _sampled_components(grid, params, uniforms)
    total = raw.sum()
    if total <= 0.0:
        # Density underflowed in every cell; fall back to the nearest location.
        probs = np.zeros_like(raw)
        probs[int(np.argmin(np.abs(grid - params.mu)))] = 1.0
        return probs
    return raw / total


def gsoftmax(grid, params: GaussianParams) -> np.ndarray:
    """Softmax over the quadratic Gaussian logits, max-subtracted."""
    grid = validate_grid(grid)
    logits = -((grid - params.mu) ** 2) / (2.0 * params.sigma**2)
    logits = logits - logits.max()
    e = np.exp(logits)
    return e / e.sum()


def sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of an index using a single uniform."""
    cum = np.cumsum(probs)
    u = rng.random()
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, probs.size - 1)


def log_prob(probs: np.ndarray, index: int) -> float:
    p = float(probs[index])
    if p <= 0.0:
        return -math.inf
    return math.log(p)


def entropy(probs: np.ndarray) -> float:
    p = np.asarray(probs, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


@dataclass(frozen=True)
class DistWithGrads:
    """A discrete distribution bundled with dP/dmu and dP/dsigma."""

    probs: np.ndarray
    dp_dmu: np.ndarray
    dp_dsigma: np.ndarray

    def log_prob_grad(self, index: int) -> tuple[float, float]:
        p = float(self.probs[index])
        if p <= 0.0:
            return 0.0, 0.0
        return float(self.dp_dmu[index] / p), float(self.dp_dsigma[index] / p)

    def entropy_grad(self) -> tuple[float, float]:
        mask = self.probs > 0.0
        w = -(1.0 + np.log(self.probs[mask]))
        return (
            float((w * self.dp_dmu[mask]).sum()),
            float((w * self.dp_dsigma[mask]).sum()),
        )


def disc_gaussian_exact_with_grads(grid, params: GaussianParams) -> DistWithGrads:
    grid = validate_grid(grid)
    mids = 0.5 * (grid[:-1] + grid[1:])
    z = (mids - params.mu) / params.sigma
    cdf = normal_cdf(z)
    pdf = normal_pdf(z)
    edges_cdf = np.concatenate(([0.0], cdf, [1.0]))
    edges_pdf = np.concatenate(([0.0], pdf, [0.0]))
    edges_zpdf = np.concatenate(([0.0], z * pdf, [0.0]))
    probs = np.diff(edges_cdf)
    dp_dmu = (edges_pdf[:-1] - edges_pdf[1:]) / params.sigma
    dp_dsigma = (edges_zpdf[:-1] - edges_zpdf[1:]) / params.sigma
    return DistWithGrads(probs, dp_dmu, dp_dsigma)


def disc_gaussian_sampled_with_grads(
    grid, params: GaussianParams, uniforms: np.ndarray
) -> DistWithGrads:
    """Sampled-estimator distribution differentiated at fixed sample points."""
    grid = validate_grid(grid)
    raw, draw_dmu, draw_dsigma = _sampled_components(grid, params, uniforms)
    total = raw.sum()
    if total <= 0.0:
        probs = np.zeros_like(raw)
        probs[int(np.argmin(np.abs(grid - params.mu)))] = 1.0
        return DistWithGrads(probs, np.zeros_like(raw), np.zeros_like(raw))
    probs = raw / total
    dp_dmu = (draw_dmu - probs * draw_dmu.sum()) / total
    dp_dsigma = (draw_dsigma - probs * draw_dsigma.sum()) / total
    return DistWithGrads(probs, dp_dmu, dp_dsigma)


def gsoftmax_with_grads(grid, params: GaussianParams) -> DistWithGrads:
    grid = validate_grid(grid)
    diff = grid - params.mu
    sigma = params.sigma
    probs = gsoftmax(grid, params)
    dl_dmu = diff / sigma**2
    dl_dsigma = diff**2 / sigma**3
    dp_dmu = probs * (dl_dmu - float(np.dot(probs, dl_dmu)))
    dp_dsigma = probs * (dl_dsigma - float(np.dot(probs, dl_dsigma)))
    return DistWithGrads(probs, dp_dmu, dp_dsigma)


def grad_log_prob(
    family: str,
    grid,
    params: GaussianParams,
    index: int,
    *,
    uniforms: np.ndarray | None = None,
) -> tuple[float, float]:
    """(d/dmu, d/dsigma) of the log probability of ``index``.

    ``family`` is one of ``gsoftmax``, ``sampled`` (requires the frozen
    ``uniforms`` that produced the distribution) or ``exact``.
    """
    if family == "gsoftmax":
        dist = gsoftmax_with_grads(grid, params)
    elif family == "sampled":
        if uniforms is None:
            raise ValueError("the sampled family needs its frozen uniforms")
        dist = disc_gaussian_sampled_with_grads(grid, params, uniforms)
    elif family == "exact":
        dist = disc_gaussian_exact_with_grads(grid, params)
    else:
        raise ValueError(f"unknown family {family!r}")
    return dist.log_prob_grad(index)


# -- continuous Gaussian (baseline policy) ----------------------------------


def gaussian_sample(params: GaussianParams, rng: np.random.Generator) -> float:
    return params.mu + params.sigma * rng.standard_normal()


def gaussian_log_pdf(x: float, params: GaussianParams) -> float:
    z = (x - params.mu) / params.sigma
    return -0.5 * z * z - math.log(params.sigma) - _LOG_SQRT_2PI


def gaussian_entropy(params: GaussianParams) -> float:
    return 0.5 * (1.0 + math.log(2.0 * math.pi)) + math.log(params.sigma)


def gaussian_log_pdf_grads(x: float, params: GaussianParams) -> tuple[float, float]:
    z = (x - params.mu) / params.sigma
    return z / params.sigma, (z * z - 1.0) / params.sigma
