"""Gaussian-peak-mixture forward model for spectral deconvolution.

The K-peak model rate is

    f(x) = sum_k a_k * exp(-(x - mu_k)^2 / sigma_k^2) + B

(no factor 2 in the exponent: the half maximum sits at |x - mu| =
sigma * sqrt(ln 2)).  The sampled parameter vector stores the peak widths
as u_k = 1/sigma_k^2, matching the Gamma prior placed on that coordinate,
so the exponent is evaluated directly as -(x - mu_k)^2 * u_k.

Parameter vector layout for K peaks (dim = 3K + 1):

    theta = (a_1..a_K, mu_1..mu_K, u_1..u_K, B)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .probmodel import ModelSpec, PriorDescriptor

__all__ = [
    "PeakParams",
    "DEFAULT_PEAK_PRIORS",
    "make_peak_model",
    "eval_peaks",
    "pack_peak_params",
    "unpack_peak_theta",
    "canonicalize_peak_draws",
]

# Default prior constants for the deconvolution task: intensity
# a ~ Gamma(2, 1); center mu ~ U(157, 167); width via 1/sigma^2 ~
# Gamma(10, 2.5); background B ~ Normal(0.1, 0.01^2).
DEFAULT_PEAK_PRIORS = {
    "intensity": PriorDescriptor.gamma(2.0, 1.0),
    "center": PriorDescriptor.uniform(157.0, 167.0),
    "width": PriorDescriptor.gamma_on_inverse_square(10.0, 2.5),
    "background": PriorDescriptor.normal(0.1, 0.01),
}


@dataclass(frozen=True)
class PeakParams:
    """Physical parameters of a K-peak spectrum (widths as sigma, not u)."""

    a: tuple[float, ...]
    mu: tuple[float, ...]
    sigma: tuple[float, ...]
    background: float

    def __post_init__(self):
        k = len(self.a)
        if k < 1 or len(self.mu) != k or len(self.sigma) != k:
            raise ValueError("a, mu, sigma must have equal positive length")
        if any(ai <= 0 for ai in self.a):
            raise ValueError("peak intensities must be > 0")
        if any(si <= 0 for si in self.sigma):
            raise ValueError("peak widths must be > 0")
        if self.background < 0:
            raise ValueError("background must be >= 0")

    @property
    def n_peaks(self) -> int:
        return len(self.a)


def eval_peaks(params: PeakParams, x):
    """Rate of the peak mixture at x (scalar or array)."""
    xv = np.asarray(x, dtype=float)
    a = np.asarray(params.a)
    mu = np.asarray(params.mu)
    sigma = np.asarray(params.sigma)
    diff = xv[..., None] - mu
    out = (a * np.exp(-(diff**2) / sigma**2)).sum(axis=-1) + params.background
    return float(out) if np.isscalar(x) else out


def _peaks_forward(n_peaks: int):
    k = n_peaks

    def forward(x, theta):
        theta = np.asarray(theta, dtype=float)
        a = theta[..., :k]
        mu = theta[..., k : 2 * k]
        u = theta[..., 2 * k : 3 * k]
        background = theta[..., 3 * k]
        # (..., K, P) intermediate; u is the inverse squared width
        diff = x - mu[..., :, None]
        profiles = np.exp(-(diff**2) * u[..., :, None])
        return np.einsum("...kp,...k->...p", profiles, a) + background[..., None]

    return forward


def make_peak_model(n_peaks: int, priors: dict | None = None) -> ModelSpec:
    """ModelSpec for the K-peak mixture with the default priors.

    ``priors`` may override any of the "intensity", "center", "width",
    "background" entries of DEFAULT_PEAK_PRIORS.
    """
    if n_peaks < 1:
        raise ValueError(f"peak count must be >= 1, got {n_peaks}")
    merged = dict(DEFAULT_PEAK_PRIORS)
    if priors:
        unknown = set(priors) - set(merged)
        if unknown:
            raise ValueError(f"unknown prior overrides: {sorted(unknown)}")
        merged.update(priors)
    k = n_peaks
    prior = (
        (merged["intensity"],) * k
        + (merged["center"],) * k
        + (merged["width"],) * k
        + (merged["background"],)
    )
    names = (
        tuple(f"a{i+1}" for i in range(k))
        + tuple(f"mu{i+1}" for i in range(k))
        + tuple(f"u{i+1}" for i in range(k))
        + ("B",)
    )
    return ModelSpec(
        id=f"M{k}",
        dim=3 * k + 1,
        prior=prior,
        forward=_peaks_forward(k),
        param_names=names,
    )


def pack_peak_params(params: PeakParams) -> np.ndarray:
    """PeakParams -> sampler coordinates (widths become u = 1/sigma^2)."""
    sigma = np.asarray(params.sigma, dtype=float)
    return np.concatenate(
        [
            np.asarray(params.a, dtype=float),
            np.asarray(params.mu, dtype=float),
            1.0 / sigma**2,
            [params.background],
        ]
    )


def unpack_peak_theta(theta, n_peaks: int) -> PeakParams:
    """Sampler coordinates -> PeakParams (u back to sigma = u**-0.5)."""
    theta = np.asarray(theta, dtype=float)
    k = n_peaks
    return PeakParams(
        a=tuple(theta[:k]),
        mu=tuple(theta[k : 2 * k]),
        sigma=tuple(1.0 / np.sqrt(theta[2 * k : 3 * k])),
        background=float(theta[3 * k]),
    )


def canonicalize_peak_draws(theta_draws: np.ndarray, n_peaks: int) -> np.ndarray:
    """Sort each draw's peak triples by ascending center.

    The mixture is invariant under relabeling the peaks, so posterior draws
    are canonicalized (mu_1 < mu_2 < ... within each draw) before any
    per-peak statistic is computed.
    """
    draws = np.array(theta_draws, dtype=float, copy=True)
    k = n_peaks
    order = np.argsort(draws[:, k : 2 * k], axis=1, kind="stable")
    rows = np.arange(draws.shape[0])[:, None]
    for block in range(3):
        sl = slice(block * k, (block + 1) * k)
        draws[:, sl] = draws[:, sl][rows, order]
    return draws
