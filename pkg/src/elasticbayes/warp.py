"""Piecewise-linear warping functions and the Dirichlet phase prior.

Two representations coexist:

* :class:`Warping` -- positive increments on uniform knots, the form the
  Dirichlet phase prior is defined on;
* :class:`PiecewiseWarp` -- a general monotone piecewise-linear bijection of
  [0, 1] on arbitrary knots, used by alignment and warping algebra
  (compose / invert / average).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

# increments are floored at this value when evaluating the log prior during
# sampling, so rounding can never produce a -inf log density for a state that
# is numerically on the simplex boundary
INCREMENT_FLOOR = 1e-12


@dataclass(frozen=True)
class Warping:
    """Warping stored as m_gamma + 1 positive increments on uniform knots."""

    increments: np.ndarray

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float).copy()
        if inc.ndim != 1 or inc.size < 2:
            raise ValueError("need at least two increments")
        if np.any(inc <= 0.0):
            raise ValueError("increments must be positive")
        if abs(inc.sum() - 1.0) > 1e-12:
            raise ValueError("increments must sum to 1")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)

    @property
    def m_gamma(self) -> int:
        return self.increments.size - 1

    @property
    def knots(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.increments.size + 1)

    @property
    def knot_values(self) -> np.ndarray:
        v = np.concatenate(([0.0], np.cumsum(self.increments)))
        v[-1] = 1.0
        return v

    def evaluate(self, t):
        return _pl_evaluate(self.knots, self.knot_values, t)

    def slope(self, t):
        return _pl_slope(self.knots, self.knot_values, t)

    def as_piecewise(self) -> "PiecewiseWarp":
        return PiecewiseWarp(self.knots, self.knot_values)


@dataclass(frozen=True)
class PiecewiseWarp:
    """General monotone piecewise-linear bijection of [0, 1]."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float).copy()
        v = np.asarray(self.values, dtype=float).copy()
        if k.shape != v.shape or k.ndim != 1 or k.size < 2:
            raise ValueError("knots and values must be matching 1-d arrays")
        if abs(k[0]) > 1e-12 or abs(k[-1] - 1.0) > 1e-12:
            raise ValueError("knots must start at 0 and end at 1")
        if abs(v[0]) > 1e-12 or abs(v[-1] - 1.0) > 1e-12:
            raise ValueError("values must start at 0 and end at 1")
        if not (np.all(np.diff(k) > 0.0) and np.all(np.diff(v) > 0.0)):
            raise ValueError("warping must be strictly increasing")
        k[0], k[-1], v[0], v[-1] = 0.0, 1.0, 0.0, 1.0
        k.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "values", v)

    def evaluate(self, t):
        return _pl_evaluate(self.knots, self.values, t)

    def slope(self, t):
        return _pl_slope(self.knots, self.values, t)

    def as_piecewise(self) -> "PiecewiseWarp":
        return self


@dataclass(frozen=True)
class PhasePrior:
    """Dirichlet prior over phase increments: concentration theta_gamma,
    partition size m_gamma, centered at the identity warping."""

    theta_gamma: float
    m_gamma: int

    def __post_init__(self):
        if self.theta_gamma <= 0.0:
            raise ValueError("theta_gamma must be positive")
        if self.m_gamma < 1:
            raise ValueError("m_gamma must be at least 1")

    @property
    def alphas(self) -> np.ndarray:
        # uniform-spacing approximation of the uniform order statistics
        n = self.m_gamma + 1
        return np.full(n, self.theta_gamma / n)


def _pl_evaluate(knots, values, t):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < -1e-12) or np.any(t_arr > 1.0 + 1e-12):
        raise ValueError("t must lie in [0, 1]")
    out = np.interp(np.clip(t_arr, 0.0, 1.0), knots, values)
    return float(out) if t_arr.ndim == 0 else out


def _pl_slope(knots, values, t):
    """Slope of the interval containing t, right-continuous at knots."""
    t_arr = np.asarray(t, dtype=float)
    idx = np.searchsorted(knots, np.clip(t_arr, 0.0, 1.0), side="right") - 1
    idx = np.clip(idx, 0, knots.size - 2)
    slopes = np.diff(values) / np.diff(knots)
    out = slopes[idx]
    return float(out) if t_arr.ndim == 0 else out


def identity_warp() -> PiecewiseWarp:
    return PiecewiseWarp(np.array([0.0, 1.0]), np.array([0.0, 1.0]))


def _merge_knots(knots: np.ndarray, min_gap: float = 1e-14) -> np.ndarray:
    k = np.unique(np.clip(knots, 0.0, 1.0))
    keep = np.concatenate(([True], np.diff(k) > min_gap))
    k = k[keep]
    k[0], k[-1] = 0.0, 1.0
    return k


def compose(g1, g2) -> PiecewiseWarp:
    """Pointwise composition g1(g2(t)) on the merged knot set.

    Exact for piecewise-linear inputs: breakpoints are g2's knots together
    with the g2-preimages of g1's knots.
    """
    g1, g2 = g1.as_piecewise(), g2.as_piecewise()
    pre = np.interp(g1.knots, g2.values, g2.knots)
    knots = _merge_knots(np.concatenate([g2.knots, pre]))
    return PiecewiseWarp(knots, g1.evaluate(g2.evaluate(knots)))


def invert(g) -> PiecewiseWarp:
    """Inverse bijection: swap the (knot, value) pairs."""
    g = g.as_piecewise()
    return PiecewiseWarp(g.values, g.knots)


def mean_warping(gammas) -> PiecewiseWarp:
    """Pointwise arithmetic mean of warpings on the merged knot set."""
    gammas = [g.as_piecewise() for g in gammas]
    if not gammas:
        raise ValueError("need at least one warping")
    knots = _merge_knots(np.concatenate([g.knots for g in gammas]))
    vals = np.mean([g.evaluate(knots) for g in gammas], axis=0)
    return PiecewiseWarp(knots, vals)


def phase_log_prior(gamma: Warping, prior: PhasePrior) -> float:
    """Log Dirichlet density of gamma's increments under the phase prior."""
    inc = np.asarray(gamma.increments if isinstance(gamma, Warping) else gamma, float)
    return dirichlet_logpdf(inc, prior.alphas)


def dirichlet_logpdf(x: np.ndarray, alphas: np.ndarray) -> float:
    if x.size != alphas.size:
        raise ValueError("dimension mismatch")
    if np.any(x <= 0.0):
        return -np.inf
    x = np.maximum(x, INCREMENT_FLOOR)
    return float(
        gammaln(alphas.sum()) - gammaln(alphas).sum() + np.sum((alphas - 1.0) * np.log(x))
    )


def phase_sample(prior: PhasePrior, seed) -> Warping:
    """Draw a warping from the Dirichlet phase prior (normalized Gammas)."""
    rng = np.random.default_rng(seed)
    g = rng.gamma(shape=prior.alphas)
    g = np.maximum(g, INCREMENT_FLOOR)
    return Warping(g / g.sum())
