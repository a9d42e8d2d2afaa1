"""Effective-Hamiltonian forward models for core-level photoemission spectra.

Two small configuration-basis Hamiltonians generate the model spectra:

- "h2": two f-occupation configurations {f0, f1} (2x2 matrices),
- "h3": three configurations {f0, f1, f2} (3x3 matrices).

The N_f-orbital second-quantized Hamiltonians reduce to these blocks with
effective hybridizations V (f0-f1) and sqrt(2(N_f-1)/N_f) * V (f1-f2),
N_f = 14.  The energy zero puts the conduction level at 0 so Delta is the
bare f-level energy; the core-hole potential -U_fc acts per f electron in
the final state only, and any overall binding-energy offset is absorbed
into the shift parameter b.

A spectrum is a weighted sum of unit-area Lorentzians: the initial ground
state |G> is photo-ionized into final eigenstates |F_j>, each line carrying
weight |<F_j|G>|^2 at position (E_j - E_g) + b with half-width Gamma.

Eigenproblems are solved by dedicated closed-form routines for dimensions
2 and 3 (vectorized over a batch axis); no iterative solver is involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probmodel import ModelSpec, PriorDescriptor

__all__ = [
    "N_F",
    "F1F2_FACTOR",
    "HamiltonianParams",
    "SpectrumLines",
    "DEFAULT_HAMILTONIAN_PRIORS",
    "build_hamiltonians",
    "eig_sym",
    "spectrum_lines",
    "eval_hamiltonian_spectrum",
    "make_hamiltonian_model",
]

# Number of spin-orbital f states; fixed by the physical problem.
N_F = 14

# Effective f1-f2 hybridization enhancement, sqrt(2(N_f-1)/N_f).
F1F2_FACTOR = math.sqrt(2.0 * (N_F - 1) / N_F)

# Flat priors for the Hamiltonian-selection task.
DEFAULT_HAMILTONIAN_PRIORS = {
    "delta": PriorDescriptor.uniform(0.0, 20.0),
    "v": PriorDescriptor.uniform(0.0, 4.0),
    "gamma": PriorDescriptor.uniform(0.01, 1.0),
    "u_fc": PriorDescriptor.uniform(0.0, 20.0),
    "u_ff": PriorDescriptor.uniform(0.0, 20.0),
    "shift": PriorDescriptor.uniform(-5.0, 5.0),
}


@dataclass(frozen=True)
class HamiltonianParams:
    """Parameters of one configuration-basis Hamiltonian model."""

    which: str  # "h2" or "h3"
    delta: float
    v: float
    u_fc: float
    gamma: float
    shift: float = 0.0
    u_ff: float | None = None

    def __post_init__(self):
        if self.which not in ("h2", "h3"):
            raise ValueError(f"which must be 'h2' or 'h3', got {self.which!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.which == "h2" and self.u_ff is not None:
            raise ValueError("u_ff is not a parameter of the two-state model")
        if self.which == "h3" and self.u_ff is None:
            raise ValueError("u_ff is required for the three-state model")


@dataclass(frozen=True)
class SpectrumLines:
    """Discrete line decomposition: ground energy plus (E_j, w_j) pairs."""

    e_ground: float
    lines: tuple[tuple[float, float], ...]  # sorted by E_j ascending


def _build_h_batch(which, delta, v, u_fc, u_ff, f1f2_factor):
    """Stack initial/final Hamiltonians for broadcast parameter arrays."""
    delta = np.asarray(delta, dtype=float)
    shape = delta.shape
    zeros = np.zeros(shape)
    v = np.broadcast_to(np.asarray(v, dtype=float), shape)
    u_fc = np.broadcast_to(np.asarray(u_fc, dtype=float), shape)
    if which == "h2":
        h_init = np.stack(
            [
                np.stack([zeros, v], axis=-1),
                np.stack([v, delta], axis=-1),
            ],
            axis=-2,
        )
        h_final = h_init.copy()
        h_final[..., 1, 1] -= u_fc
        return h_init, h_final
    u_ff = np.broadcast_to(np.asarray(u_ff, dtype=float), shape)
    v2 = f1f2_factor * v
    h_init = np.stack(
        [
            np.stack([zeros, v, zeros], axis=-1),
            np.stack([v, delta, v2], axis=-1),
            np.stack([zeros, v2, 2.0 * delta + u_ff], axis=-1),
        ],
        axis=-2,
    )
    h_final = h_init.copy()
    h_final[..., 1, 1] -= u_fc
    h_final[..., 2, 2] -= 2.0 * u_fc
    return h_init, h_final


def build_hamiltonians(params: HamiltonianParams, f1f2_factor: float = F1F2_FACTOR):
    """Initial- and final-state matrices in the f-occupation basis."""
    h_init, h_final = _build_h_batch(
        params.which, params.delta, params.v, params.u_fc, params.u_ff, f1f2_factor
    )
    return h_init, h_final


def _fix_signs(vecs):
    """Deterministic sign: largest-magnitude component of each vector > 0."""
    n = vecs.shape[-1]
    comp = np.take_along_axis(
        vecs, np.argmax(np.abs(vecs), axis=-2)[..., None, :], axis=-2
    )
    flip = np.where(comp < 0, -1.0, 1.0)
    return vecs * flip


def _eig2(a):
    """Closed-form eigensystem of symmetric (..., 2, 2) matrices."""
    a00 = a[..., 0, 0]
    a01 = a[..., 0, 1]
    a11 = a[..., 1, 1]
    mid = 0.5 * (a00 + a11)
    rad = np.sqrt((0.5 * (a00 - a11)) ** 2 + a01**2)
    lo = mid - rad
    hi = mid + rad
    # Eigenvector of the larger eigenvalue from whichever row formula is
    # better conditioned; the other is its exact perpendicular.
    c1 = np.stack([a01, hi - a00], axis=-1)
    c2 = np.stack([hi - a11, a01], axis=-1)
    n1 = (c1**2).sum(axis=-1)
    n2 = (c2**2).sum(axis=-1)
    v_hi = np.where(n1[..., None] >= n2[..., None], c1, c2)
    norm = np.sqrt((v_hi**2).sum(axis=-1))
    degenerate = norm <= 0
    v_hi = np.where(
        degenerate[..., None],
        np.broadcast_to([1.0, 0.0], v_hi.shape),
        v_hi / np.where(degenerate, 1.0, norm)[..., None],
    )
    v_lo = np.stack([-v_hi[..., 1], v_hi[..., 0]], axis=-1)
    vals = np.stack([lo, hi], axis=-1)
    vecs = np.stack([v_lo, v_hi], axis=-1)  # columns
    return vals, _fix_signs(vecs)


def _cross(u, w):
    return np.stack(
        [
            u[..., 1] * w[..., 2] - u[..., 2] * w[..., 1],
            u[..., 2] * w[..., 0] - u[..., 0] * w[..., 2],
            u[..., 0] * w[..., 1] - u[..., 1] * w[..., 0],
        ],
        axis=-1,
    )


def _det3(a):
    return (
        a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
        - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
        + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
    )


def _eigvals3_trig(a):
    """Ascending eigenvalues of symmetric (..., 3, 3) via the cubic formula."""
    p1 = a[..., 0, 1] ** 2 + a[..., 0, 2] ** 2 + a[..., 1, 2] ** 2
    q = (a[..., 0, 0] + a[..., 1, 1] + a[..., 2, 2]) / 3.0
    p2 = (
        (a[..., 0, 0] - q) ** 2
        + (a[..., 1, 1] - q) ** 2
        + (a[..., 2, 2] - q) ** 2
        + 2.0 * p1
    )
    p = np.sqrt(p2 / 6.0)
    safe_p = np.where(p > 0, p, 1.0)
    b = (a - q[..., None, None] * np.eye(3)) / safe_p[..., None, None]
    r = np.clip(0.5 * _det3(b), -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    hi = q + 2.0 * p * np.cos(phi)
    lo = q + 2.0 * p * np.cos(phi + 2.0 * math.pi / 3.0)
    mid = 3.0 * q - hi - lo
    return np.stack([lo, mid, hi], axis=-1)


def _unit_perp(v):
    """A unit vector orthogonal to each unit vector in v."""
    axis = np.argmin(np.abs(v), axis=-1)
    e = np.zeros_like(v)
    np.put_along_axis(e, axis[..., None], 1.0, axis=-1)
    p = _cross(v, e)
    return p / np.sqrt((p**2).sum(axis=-1))[..., None]


def _eig3(a):
    """Closed-form eigensystem of symmetric (..., 3, 3) matrices.

    The eigenvector of the best-separated eigenvalue is taken from row
    cross products of (A - lambda I), which is well conditioned exactly
    because that eigenvalue is isolated; the remaining pair is solved
    exactly in the 2D orthogonal complement, so near-degenerate pairs
    never feed an ill-conditioned formula.
    """
    vals = _eigvals3_trig(a)
    gap_lo = vals[..., 1] - vals[..., 0]
    gap_hi = vals[..., 2] - vals[..., 1]
    lam_iso = np.where(gap_lo >= gap_hi, vals[..., 0], vals[..., 2])

    m = a - lam_iso[..., None, None] * np.eye(3)
    r0, r1, r2 = m[..., 0, :], m[..., 1, :], m[..., 2, :]
    cand = np.stack([_cross(r0, r1), _cross(r0, r2), _cross(r1, r2)], axis=-2)
    norms = np.sqrt((cand**2).sum(axis=-1))
    best = np.argmax(norms, axis=-1)
    v_iso = np.take_along_axis(cand, best[..., None, None], axis=-2)[..., 0, :]
    nrm = np.take_along_axis(norms, best[..., None], axis=-1)[..., 0]
    degenerate = nrm <= 0
    v_iso = np.where(
        degenerate[..., None],
        np.broadcast_to([1.0, 0.0, 0.0], v_iso.shape),
        v_iso / np.where(degenerate, 1.0, nrm)[..., None],
    )
    lam_iso = np.einsum("...i,...ij,...j->...", v_iso, a, v_iso)

    p = _unit_perp(v_iso)
    q = _cross(v_iso, p)
    ap = np.einsum("...ij,...j->...i", a, p)
    aq = np.einsum("...ij,...j->...i", a, q)
    block = np.empty(a.shape[:-2] + (2, 2))
    block[..., 0, 0] = (p * ap).sum(axis=-1)
    block[..., 1, 1] = (q * aq).sum(axis=-1)
    block[..., 0, 1] = block[..., 1, 0] = 0.5 * ((p * aq).sum(axis=-1) + (q * ap).sum(axis=-1))
    bvals, bvecs = _eig2(block)
    w0 = bvecs[..., 0, 0, None] * p + bvecs[..., 1, 0, None] * q
    w1 = bvecs[..., 0, 1, None] * p + bvecs[..., 1, 1, None] * q

    all_vals = np.stack([lam_iso, bvals[..., 0], bvals[..., 1]], axis=-1)
    all_vecs = np.stack([v_iso, w0, w1], axis=-1)  # columns
    order = np.argsort(all_vals, axis=-1, kind="stable")
    vals_sorted = np.take_along_axis(all_vals, order, axis=-1)
    vecs_sorted = np.take_along_axis(all_vecs, order[..., None, :], axis=-1)
    return vals_sorted, _fix_signs(vecs_sorted)


def eig_sym(h):
    """Eigenvalues (ascending) and orthonormal eigenvector columns.

    Accepts shape (n, n) or (B, n, n) with n <= 3.  Input must be
    symmetric to 1e-12 absolute; signs follow the largest-magnitude-
    component-positive convention.
    """
    h = np.asarray(h, dtype=float)
    n = h.shape[-1]
    if h.ndim < 2 or h.shape[-2] != n or n > 3 or n < 1:
        raise ValueError(f"expected (..., n, n) with n <= 3, got shape {h.shape}")
    if np.max(np.abs(h - np.swapaxes(h, -1, -2))) > 1e-12:
        raise ValueError("matrix is not symmetric within 1e-12")
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    if n == 1:
        return h[..., 0, 0][..., None], np.ones_like(h)
    if n == 2:
        return _eig2(h)
    return _eig3(h)


def _lines_batch(which, delta, v, u_fc, u_ff, f1f2_factor=F1F2_FACTOR):
    """Ground energy, line energies and weights for broadcast parameters."""
    h_init, h_final = _build_h_batch(which, delta, v, u_fc, u_ff, f1f2_factor)
    # one batched eigensolve covers both matrices
    vals, vecs = eig_sym(np.stack([h_init, h_final]))
    vals_i, vecs_i = vals[0], vecs[0]
    vals_f, vecs_f = vals[1], vecs[1]
    ground = vecs_i[..., :, 0]
    e_ground = vals_i[..., 0]
    # The core annihilator maps each f configuration onto itself, so line
    # weights are squared overlaps with the final eigenvectors.
    w = np.einsum("...jk,...j->...k", vecs_f, ground) ** 2
    return e_ground, vals_f, w


def spectrum_lines(
    params: HamiltonianParams, f1f2_factor: float = F1F2_FACTOR
) -> SpectrumLines:
    """Line decomposition of the spectrum for one parameter set."""
    e_ground, energies, weights = _lines_batch(
        params.which, params.delta, params.v, params.u_fc, params.u_ff, f1f2_factor
    )
    return SpectrumLines(
        e_ground=float(e_ground),
        lines=tuple((float(e), float(w)) for e, w in zip(energies, weights)),
    )


def _lorentzian_mix(x, e_ground, energies, weights, gamma, shift):
    """Sum of unit-area Lorentzians at (E_j - E_g) + shift."""
    pos = energies - e_ground[..., None] + shift[..., None]
    d = x - pos[..., :, None]
    g = gamma[..., None, None]
    profile = (g / math.pi) / (d**2 + g**2)
    return (weights[..., :, None] * profile).sum(axis=-2)


def eval_hamiltonian_spectrum(params: HamiltonianParams, x, f1f2_factor: float = F1F2_FACTOR):
    """Spectrum rate at x: strictly positive, unit total integral."""
    xv = np.asarray(x, dtype=float)
    e_ground, energies, weights = _lines_batch(
        params.which, params.delta, params.v, params.u_fc, params.u_ff, f1f2_factor
    )
    out = _lorentzian_mix(
        np.atleast_1d(xv),
        np.asarray(e_ground),
        energies,
        weights,
        np.asarray(params.gamma, dtype=float),
        np.asarray(params.shift, dtype=float),
    )
    return float(out[0]) if np.isscalar(x) else out.reshape(xv.shape)


def _hamiltonian_forward(which, f1f2_factor):
    has_uff = which == "h3"

    def forward(x, theta):
        theta = np.asarray(theta, dtype=float)
        delta = theta[..., 0]
        v = theta[..., 1]
        gamma = theta[..., 2]
        u_fc = theta[..., 3]
        u_ff = theta[..., 4] if has_uff else None
        shift = theta[..., 5] if has_uff else theta[..., 4]
        e_ground, energies, weights = _lines_batch(
            which, delta, v, u_fc, u_ff, f1f2_factor
        )
        return _lorentzian_mix(x, e_ground, energies, weights, gamma, shift)

    return forward


def make_hamiltonian_model(
    which: str,
    priors: dict | None = None,
    f1f2_factor: float = F1F2_FACTOR,
) -> ModelSpec:
    """ModelSpec for the two- ("h2") or three-state ("h3") Hamiltonian.

    Parameter order is (delta, v, gamma, u_fc[, u_ff], b); ids follow the
    number of configurations: "M2" for h2, "M3" for h3.
    """
    if which not in ("h2", "h3"):
        raise ValueError(f"which must be 'h2' or 'h3', got {which!r}")
    merged = dict(DEFAULT_HAMILTONIAN_PRIORS)
    if priors:
        unknown = set(priors) - set(merged)
        if unknown:
            raise ValueError(f"unknown prior overrides: {sorted(unknown)}")
        merged.update(priors)
    if which == "h2":
        names = ("delta", "v", "gamma", "u_fc", "b")
        prior = (merged["delta"], merged["v"], merged["gamma"], merged["u_fc"], merged["shift"])
    else:
        names = ("delta", "v", "gamma", "u_fc", "u_ff", "b")
        prior = (
            merged["delta"],
            merged["v"],
            merged["gamma"],
            merged["u_fc"],
            merged["u_ff"],
            merged["shift"],
        )
    return ModelSpec(
        id="M2" if which == "h2" else "M3",
        dim=len(names),
        prior=prior,
        forward=_hamiltonian_forward(which, f1f2_factor),
        param_names=names,
    )


def params_from_theta(which: str, theta) -> HamiltonianParams:
    """Sampler coordinates -> HamiltonianParams."""
    theta = np.asarray(theta, dtype=float)
    if which == "h2":
        return HamiltonianParams(
            which="h2", delta=theta[0], v=theta[1], gamma=theta[2],
            u_fc=theta[3], shift=theta[4],
        )
    return HamiltonianParams(
        which="h3", delta=theta[0], v=theta[1], gamma=theta[2],
        u_fc=theta[3], u_ff=theta[4], shift=theta[5],
    )
