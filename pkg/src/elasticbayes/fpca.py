"""Vertical fPCA of aligned SRVFs and the empirical amplitude prior.

The covariance eigenproblem is solved on the k x k Gram matrix of centered
aligned SRVFs (k training curves, usually far fewer than grid points) and
mapped back to function space, with eigenfunctions normalized to unit L2
norm under trapezoidal quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .funcdata import Grid, SampledFunction
from .srvf import Srvf, q_inverse
from .align import RegistrationResult


@dataclass(frozen=True)
class EmpiricalAmplitudeBasis:
    """Empirical amplitude prior: mean SRVF, orthonormal basis, eigenvalues
    and the translation statistics of the training sample."""

    grid: Grid
    mean_srvf: Srvf
    basis: np.ndarray        # (B, n) rows orthonormal under trapezoid weights
    eigenvalues: np.ndarray  # (B,) non-increasing, nonnegative
    translation_mean: float
    translation_var: float

    @property
    def n_components(self) -> int:
        return self.basis.shape[0]

    def basis_srvfs(self) -> list[Srvf]:
        return [Srvf(self.grid, row) for row in self.basis]


def _trapezoid_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    w[1:] += 0.5 * np.diff(t)
    w[:-1] += 0.5 * np.diff(t)
    return w


def vertical_fpca(reg: RegistrationResult, B: int) -> EmpiricalAmplitudeBasis:
    """Eigendecomposition of the sample covariance of aligned SRVFs about
    the Karcher mean, truncated to B components."""
    k = len(reg.aligned_srvfs)
    grid = reg.mean_srvf.grid
    t = grid.points
    n = t.size
    if k < 2:
        raise ValueError("need at least two training functions")
    if B > min(k - 1, n):
        raise ValueError(f"B={B} exceeds min(k-1, grid size) = {min(k - 1, n)}")

    X = np.stack([a.values for a in reg.aligned_srvfs]) - reg.mean_srvf.values
    w = _trapezoid_weights(t)
    gram = (X * w) @ X.T / (k - 1)
    evals, evecs = np.linalg.eigh(gram)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    if np.any(evals < -1e-10):
        raise RuntimeError("covariance eigenvalue significantly negative")
    evals = np.clip(evals, 0.0, None)

    phis = np.zeros((B, n))
    mid = n // 2
    for b in range(B):
        phi = evecs[:, b] @ X
        norm = np.sqrt(np.trapezoid(phi**2, t))
        if norm > 0:
            phi = phi / norm
        if phi[mid] < 0:
            phi = -phi  # reproducible sign convention
        phis[b] = phi

    f0s = np.array([a.values[0] for a in reg.amplitudes])
    return EmpiricalAmplitudeBasis(
        grid=grid,
        mean_srvf=reg.mean_srvf,
        basis=phis,
        eigenvalues=evals[:B],
        translation_mean=float(f0s.mean()),
        translation_var=float(f0s.var(ddof=1)) if k > 1 else 0.0,
    )


def project(q_aligned: Srvf, basis: EmpiricalAmplitudeBasis) -> np.ndarray:
    """Coefficients <q - mu, phi_b> under trapezoidal quadrature."""
    if q_aligned.grid != basis.grid:
        raise ValueError("SRVF and basis must share a grid")
    centered = q_aligned.values - basis.mean_srvf.values
    t = basis.grid.points
    return np.array([np.trapezoid(centered * phi, t) for phi in basis.basis])


def reconstruct(c: np.ndarray, basis: EmpiricalAmplitudeBasis) -> Srvf:
    """SRVF mu + sum_b c_b phi_b on the basis grid."""
    c = np.asarray(c, dtype=float)
    if c.shape != (basis.n_components,):
        raise ValueError("coefficient vector has the wrong length")
    return Srvf(basis.grid, basis.mean_srvf.values + c @ basis.basis)


def variance_explained(basis: EmpiricalAmplitudeBasis) -> np.ndarray:
    """Cumulative fraction of retained eigenvalue mass per component."""
    tot = basis.eigenvalues.sum()
    if tot == 0:
        return np.ones_like(basis.eigenvalues)
    return np.cumsum(basis.eigenvalues) / tot


def generative_draw(basis: EmpiricalAmplitudeBasis, seed) -> SampledFunction:
    """Random amplitude function: coefficients from N(0, diag(eigenvalues)),
    translation from the training start-value distribution."""
    rng = np.random.default_rng(seed)
    c = rng.normal(0.0, np.sqrt(basis.eigenvalues))
    T = rng.normal(basis.translation_mean, np.sqrt(basis.translation_var))
    return q_inverse(reconstruct(c, basis), T)
