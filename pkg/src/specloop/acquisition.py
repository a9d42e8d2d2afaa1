"""Posterior-expected KL uncertainty scores and next-point selection.

At each candidate point x the score G(x; M) is the posterior mean of the
KL divergence between the Poisson predictive at the current best-fit rate
f_hat(x) and the predictive at a posterior draw's rate f(x; theta):

    KL = T * (-f_hat + f + f_hat * ln(f_hat / f))

The factor T only scales every score by the same constant, so the ranking
of candidate points (and hence the selection) does not depend on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probmodel import ModelSpec
from .remc import PosteriorSamples

__all__ = [
    "AcquisitionScores",
    "poisson_kl",
    "uncertainty_scores",
    "select_points",
]


@dataclass(frozen=True)
class AcquisitionScores:
    """Per-candidate-point scores for the best and second-best models."""

    grid: np.ndarray
    g_best: np.ndarray
    g_second: np.ndarray


def poisson_kl(f_hat: float, f: float, exposure: float = 1.0) -> float:
    """KL divergence (nats) between Poisson(f_hat*T) and Poisson(f*T).

    Conventions: 0 * ln 0 = 0, and f = 0 against f_hat > 0 diverges to
    +inf (the draw deems a positive-rate observation impossible).
    """
    if f_hat < 0 or f < 0 or exposure <= 0:
        raise ValueError("rates must be >= 0 and exposure > 0")
    if f_hat == 0.0:
        return exposure * f
    if f == 0.0:
        return float("inf")
    return exposure * (-f_hat + f + f_hat * math.log(f_hat / f))


def _poisson_kl_array(f_hat, f, exposure=1.0):
    """Vectorized KL with the same edge conventions as poisson_kl."""
    f_hat = np.asarray(f_hat, dtype=float)
    f = np.asarray(f, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        body = -f_hat + f + f_hat * np.log(f_hat / f)
    body = np.where(f_hat == 0, f, body)
    body = np.where((f == 0) & (f_hat > 0), np.inf, body)
    return exposure * body


def uncertainty_scores(
    samples: PosteriorSamples,
    f_hat,
    model: ModelSpec,
    grid,
    exposure: float = 1.0,
    max_draws: int | None = None,
) -> np.ndarray:
    """G(x; M): mean KL between the best-fit rate and posterior-draw rates.

    ``f_hat`` is the rate of the best model's MAP over the grid (array) or
    a callable producing it.  The Monte Carlo mean runs over all retained
    draws unless ``max_draws`` asks for an evenly strided subsample.
    Draws with zero rate where f_hat > 0 push the score to +inf.
    """
    if samples.n_draws == 0:
        raise ValueError("no retained draws")
    grid = np.asarray(grid, dtype=float)
    f_hat_vals = np.asarray(f_hat(grid) if callable(f_hat) else f_hat, dtype=float)
    if f_hat_vals.shape != grid.shape:
        raise ValueError("f_hat must evaluate to one rate per grid point")
    draws = samples.theta_draws
    if max_draws is not None and max_draws < draws.shape[0]:
        stride = draws.shape[0] / max_draws
        idx = np.minimum((np.arange(max_draws) * stride).astype(int), draws.shape[0] - 1)
        draws = draws[idx]
    f_draws = model.forward(grid, draws)  # (n_draws, P)
    kl = _poisson_kl_array(f_hat_vals[None, :], f_draws, exposure)
    return kl.mean(axis=0)


def select_points(scores: AcquisitionScores, n: int) -> list[float]:
    """Pick the next n points: n/2 by g_best, then n/2 by g_second.

    Each half is ordered by descending score with ties to the smaller x;
    a point may appear in both halves (it is then measured twice).
    """
    if n % 2 != 0:
        raise ValueError(f"number of points must be even, got {n}")
    grid = np.asarray(scores.grid, dtype=float)
    half = n // 2
    if half > len(grid):
        raise ValueError(f"cannot select {half} points from a grid of {len(grid)}")
    out = []
    for g in (scores.g_best, scores.g_second):
        g = np.asarray(g, dtype=float)
        if np.any(np.isnan(g)):
            raise ValueError("scores must not contain NaN")
        order = np.lexsort((grid, -g))
        out.extend(float(x) for x in grid[order[:half]])
    return out
