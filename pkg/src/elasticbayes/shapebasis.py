"""Shape-restricted SRVF basis: B-splines multiplied by a polynomial with
fixed zeros at the change points, so every generated amplitude function has
its extrema exactly there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .funcdata import Grid
from .srvf import Srvf


def clamped_knots(n_basis: int, order: int) -> np.ndarray:
    """Clamped knot vector on [0, 1] yielding n_basis B-spline functions."""
    n_interior = n_basis - order
    if n_interior < 0:
        raise ValueError("n_basis must be at least the spline order")
    interior = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
    return np.concatenate([np.zeros(order), interior, np.ones(order)])


def bspline_eval(knots: np.ndarray, order: int, b: int, t) -> float | np.ndarray:
    """Value of the b-th B-spline basis function (Cox-de Boor recursion)."""
    knots = np.asarray(knots, dtype=float)
    if order < 1 or knots.size < 2 * order or np.any(np.diff(knots) < 0):
        raise ValueError("invalid knot vector")
    n_basis = knots.size - order
    if not 0 <= b < n_basis:
        raise ValueError(f"basis index {b} out of range [0, {n_basis})")
    coeffs = np.zeros(n_basis)
    coeffs[b] = 1.0
    spl = BSpline(knots, coeffs, order - 1, extrapolate=False)
    t_arr = np.asarray(t, dtype=float)
    # evaluate the closed last interval by its left limit
    out = np.nan_to_num(spl(np.where(t_arr >= knots[-1], np.nextafter(knots[-1], -np.inf), t_arr)))
    return float(out) if t_arr.ndim == 0 else out


@dataclass(frozen=True)
class ShapeRestrictedBasis:
    """Basis U*_b(t) = M * prod_h (t - alpha_h) * U_b(t)."""

    alpha: np.ndarray
    M: int
    n_basis: int
    spline_order: int = 4
    knots: np.ndarray = field(init=False)

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if a.size and (np.any(a <= 0.0) or np.any(a >= 1.0)):
            raise ValueError("change points must lie strictly inside (0, 1)")
        if np.any(np.diff(a) < 0):
            raise ValueError("change points must be non-decreasing")
        if self.M not in (-1, 1):
            raise ValueError("M must be -1 or +1")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "knots", clamped_knots(self.n_basis, self.spline_order))

    @property
    def H(self) -> int:
        return self.alpha.size

    def changepoint_factor(self, t):
        t_arr = np.asarray(t, dtype=float)
        prod = np.ones_like(t_arr)
        for a in self.alpha:
            prod = prod * (t_arr - a)
        return self.M * prod

    def evaluate(self, b: int, t):
        """U*_b(t); exactly zero at every change point."""
        return self.changepoint_factor(t) * bspline_eval(self.knots, self.spline_order, b, t)

    def design_matrix(self, grid: Grid) -> np.ndarray:
        """(n_basis, n) matrix of U*_b sampled on the grid."""
        t = grid.points
        return np.stack([self.evaluate(b, t) for b in range(self.n_basis)])


def shape_basis_eval(basis: ShapeRestrictedBasis, b: int, t):
    return basis.evaluate(b, t)


def srvf_from_coeffs(c: np.ndarray, basis: ShapeRestrictedBasis, grid: Grid) -> Srvf:
    """SRVF sum_b c_b U*_b on the grid; all coefficients must be positive so
    the sign pattern between change points is fixed by M."""
    c = np.asarray(c, dtype=float)
    if c.shape != (basis.n_basis,):
        raise ValueError("coefficient vector has the wrong length")
    if np.any(c <= 0.0):
        raise ValueError("all coefficients must be positive")
    return Srvf(grid, c @ basis.design_matrix(grid))
