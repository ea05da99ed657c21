"""Uniform sampling of long-only portfolios and their window statistics.

Weight vectors are drawn uniformly from the standard simplex
(nonnegative, summing to one) by normalising independent standard
exponentials. For each sampled portfolio ``x`` the window return
``x . rbar`` and window volatility ``x' Sigma x`` are evaluated against
the window moments; the fused kernel does both in one pass without
materialising the weight matrix.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import derive_substream  # re-exported: per-window streams

__all__ = [
    "EvaluatedSamples",
    "sample_uniform_simplex",
    "eval_portfolios",
    "sample_and_eval",
    "derive_substream",
]


@dataclass(frozen=True)
class EvaluatedSamples:
    """Paired return/volatility values of one Monte Carlo batch."""

    returns: np.ndarray
    volatilities: np.ndarray

    def __post_init__(self):
        if self.returns.shape != self.volatilities.shape:
            raise ValueError("returns and volatilities must have equal length")
        if self.returns.ndim != 1:
            raise ValueError("evaluated samples must be one-dimensional")

    def __len__(self) -> int:
        return self.returns.shape[0]


def _check_dims(n: int, count: int):
    if n < 1:
        raise ValueError("simplex dimension must be positive")
    if count < 1:
        raise ValueError("sample count must be positive")


def sample_uniform_simplex(n: int, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` weight vectors uniformly from the ``n``-simplex.

    Rows are exact simplex points: nonnegative and summing to one up to
    rounding. The draw is counter based, so the same ``(n, count, seed)``
    always yields the same matrix.
    """
    _check_dims(n, count)
    return _kernels.sample_weights(seed, n, count)


def _check_moments(rbar, sigma):
    rbar = np.ascontiguousarray(rbar, dtype=np.float64)
    sigma = np.ascontiguousarray(sigma, dtype=np.float64)
    if rbar.ndim != 1:
        raise ValueError("mean vector must be one-dimensional")
    n = rbar.shape[0]
    if sigma.shape != (n, n):
        raise ValueError("covariance shape does not match mean vector")
    scale = max(1.0, float(np.abs(sigma).max()))
    if np.abs(sigma - sigma.T).max() > 1e-12 * scale:
        raise ValueError("covariance must be symmetric")
    return rbar, sigma, n


def eval_portfolios(weights: np.ndarray, rbar, sigma) -> EvaluatedSamples:
    """Window return and volatility of explicit weight vectors."""
    rbar, sigma, n = _check_moments(rbar, sigma)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != n:
        raise ValueError("weights must be a (count, n) matrix")
    rets = weights @ rbar
    vols = np.einsum("ri,ij,rj->r", weights, sigma, weights, optimize=True)
    return EvaluatedSamples(returns=rets, volatilities=vols)


def sample_and_eval(n: int, count: int, seed: int, rbar, sigma) -> EvaluatedSamples:
    """Fused draw-and-evaluate over ``count`` uniform portfolios.

    Equivalent to ``eval_portfolios(sample_uniform_simplex(...), ...)``
    but never stores the weights; this is the hot path of the rolling
    pipeline.
    """
    _check_dims(n, count)
    rbar, sigma, n2 = _check_moments(rbar, sigma)
    if n2 != n:
        raise ValueError("moment dimension does not match n")
    rets, vols = _kernels.sample_eval(seed, n, count, rbar, sigma)
    return EvaluatedSamples(returns=rets, volatilities=vols)
