"""Pairwise elastic registration by dynamic programming and the Karcher mean
of amplitudes, with identity-centering of the returned phases.

The DP lattice lives on a common uniform grid: a monotone path from (0, 0)
to (n-1, n-1) encodes a piecewise-linear warping, and the cost of each
segment is the trapezoidal discretization of the squared L2 distance between
the reference SRVF and the warped SRVF along that segment.  A slope window
of +/- W grid steps bounds the cost at O(n^2 W^2); passing ``window=None``
enables the exact all-paths mode used by the enumeration oracle tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .funcdata import Grid, SampledFunction, uniform_grid, resample
from .srvf import Srvf, q_inverse, q_transform, srvf_distance, warp_action
from .warp import PiecewiseWarp, invert

DEFAULT_WINDOW = 7


@dataclass
class RegistrationResult:
    """Output of phase-amplitude separation of a dense training sample."""

    mean_srvf: Srvf
    mean_function: SampledFunction
    phases: list[PiecewiseWarp]
    aligned_srvfs: list[Srvf]
    amplitudes: list[SampledFunction]
    iterations: int
    final_cost: float
    cost_trace: list[float] = field(default_factory=list)
    converged: bool = True


def _segment_costs(qr: np.ndarray, qv: np.ndarray, t: np.ndarray, window: int):
    """Cost arrays for every step shape (di, dj), di, dj in 1..window.

    cost[(di, dj)][i, j] is the trapezoidal integral over [t_i, t_{i+di}] of
    (q_ref(t) - q(gamma(t)) sqrt(s))^2 for the linear segment mapping
    [t_i, t_{i+di}] onto [t_j, t_{j+dj}] with slope s = dj/di.
    """
    n = t.size
    h = t[1] - t[0]
    costs = {}
    for di in range(1, window + 1):
        if di >= n:
            break
        m = di + 1
        # B[i, :] = q_ref on the segment starting at i
        B = np.lib.stride_tricks.sliding_window_view(qr, m)
        w = np.full(m, h)
        w[0] = w[-1] = h / 2.0
        for dj in range(1, window + 1):
            if dj >= n:
                break
            s = dj / di
            # fractional sample positions of q along each segment start j
            offs = np.arange(m) * s
            base = np.arange(n - dj)
            pos = (base[:, None] + offs[None, :]) * h
            A = np.interp(pos.ravel(), t, qv).reshape(n - dj, m)
            diff = B[:, None, :] - np.sqrt(s) * A[None, :, :]
            costs[(di, dj)] = np.einsum("ijm,m->ij", diff * diff, w)
    return costs


def dp_align(q_ref: Srvf, q: Srvf, grid_size: int | None = None,
             window: int | None = DEFAULT_WINDOW) -> tuple[PiecewiseWarp, float]:
    """Optimal warping of q toward q_ref over the monotone DP lattice.

    Returns (gamma, cost) with (q, gamma) approximately equal to q_ref and
    cost the attained discretized squared distance.  ``window=None`` removes
    the slope constraint (exact over all monotone lattice paths).
    """
    if grid_size is None:
        grid_size = max(len(q_ref.grid), len(q.grid))
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    g = uniform_grid(grid_size)
    t = g.points
    qr = np.interp(t, q_ref.grid.points, q_ref.values)
    qv = np.interp(t, q.grid.points, q.values)
    n = grid_size
    win = n - 1 if window is None else min(window, n - 1)

    costs = _segment_costs(qr, qv, t, win)
    inf = np.inf
    dp = np.full((n, n), inf)
    dp[0, 0] = 0.0
    back_di = np.zeros((n, n), dtype=np.int32)
    back_dj = np.zeros((n, n), dtype=np.int32)
    for k in range(1, n):
        row = dp[k]
        for (di, dj), c in costs.items():
            if di > k or dj >= n:
                continue
            prev = dp[k - di, : n - dj]
            cand = prev + c[k - di, : n - dj]
            sl = slice(dj, n)
            better = cand < row[sl]
            if np.any(better):
                row[sl] = np.where(better, cand, row[sl])
                back_di[k, sl] = np.where(better, di, back_di[k, sl])
                back_dj[k, sl] = np.where(better, dj, back_dj[k, sl])
    total = dp[n - 1, n - 1]
    if not np.isfinite(total):
        raise RuntimeError("no feasible monotone path; widen the window")

    # backtrack
    path_i, path_j = [n - 1], [n - 1]
    i, j = n - 1, n - 1
    while i > 0:
        di, dj = back_di[i, j], back_dj[i, j]
        i, j = i - di, j - dj
        path_i.append(i)
        path_j.append(j)
    path_i.reverse()
    path_j.reverse()
    gamma = PiecewiseWarp(t[path_i], t[path_j])
    return gamma, float(total)


def _center_phases(phases: np.ndarray, t: np.ndarray, tol: float,
                   max_rounds: int = 100):
    """Iteratively recenter so the pointwise mean phase is the identity.

    Each round replaces phase_i by gbar^{-1} o phase_i and pushes the mean
    warping gbar into the template and aligned SRVFs, preserving the
    reconstruction identity amplitude o phase = observation at every step.
    """
    gtot = t.copy()
    best = (np.inf, gtot, phases)
    for _ in range(max_rounds):
        gbar = phases.mean(axis=0)
        dev = np.max(np.abs(gbar - t))
        if dev < best[0]:
            best = (dev, gtot.copy(), phases.copy())
        if dev <= tol or dev > best[0]:
            # stop improving once re-linearization error dominates
            break
        # phase_i <- gbar^{-1} o phase_i (interp with swapped coordinates)
        phases = np.interp(phases, gbar, t)
        phases[:, 0], phases[:, -1] = 0.0, 1.0
        phases = np.maximum.accumulate(phases, axis=1)
        # accumulate the template warp: gtot <- gtot o gbar
        gtot = np.interp(gbar, t, gtot)
        gtot[0], gtot[-1] = 0.0, 1.0
    _, gtot, phases = best
    return gtot, phases


def karcher_mean(fs: list[SampledFunction], tol: float = 1e-6,
                 max_iter: int = 50, window: int | None = DEFAULT_WINDOW,
                 center_tol: float = 1e-4) -> RegistrationResult:
    """Karcher mean of the amplitudes of a dense sample, with centering.

    Initializes at the medoid under pairwise aligned distances, alternates
    aligning every SRVF to the template with updating the template as the
    pointwise mean of aligned SRVFs, then recenters so the mean of the
    returned phases is the identity warping.
    """
    if len(fs) < 2:
        raise ValueError("need at least two functions")
    g = fs[0].grid
    if any(f.grid != g for f in fs[1:]):
        raise ValueError("all functions must share a common working grid")
    t = g.points
    k = len(fs)
    qs = [q_transform(f) for f in fs]

    # medoid initialization: element minimizing the total aligned cost
    pair = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            _, c = dp_align(qs[i], qs[j], window=window)
            pair[i, j] = pair[j, i] = c
    mu = Srvf(g, qs[int(np.argmin(pair.sum(axis=1)))].values.copy())

    cost_trace: list[float] = []
    aligners: list[PiecewiseWarp] = []
    aligned: list[Srvf] = []
    converged = False
    best = None
    for it in range(max_iter):
        aligners_new = []
        aligned_new = []
        for q in qs:
            gam, _ = dp_align(mu, q, window=window)
            aligners_new.append(gam)
            aligned_new.append(warp_action(q, gam))
        cost = sum(srvf_distance(mu, a) ** 2 for a in aligned_new)
        if cost_trace and cost > cost_trace[-1]:
            break  # numerical wiggle at convergence; keep the previous state
        aligners, aligned = aligners_new, aligned_new
        cost_trace.append(cost)
        mu = Srvf(g, np.mean([a.values for a in aligned], axis=0))
        if len(cost_trace) >= 2 and abs(cost_trace[-2] - cost) <= tol * max(cost_trace[-2], 1e-12):
            converged = True
            break

    # phases mapping amplitude -> observation are the inverses of the aligners
    phase_mat = np.stack([invert(a).evaluate(t) for a in aligners])
    phase_mat[:, 0], phase_mat[:, -1] = 0.0, 1.0
    phase_mat = np.maximum.accumulate(phase_mat, axis=1)
    gtot_vals, phase_mat = _center_phases(phase_mat, t, center_tol)

    gtot = _to_warp(t, gtot_vals)
    mu = warp_action(mu, gtot)
    aligned = [warp_action(a, gtot) for a in aligned]
    phases = [_to_warp(t, row) for row in phase_mat]

    f0s = np.array([f.values[0] for f in fs])
    mean_function = q_inverse(mu, float(f0s.mean()))
    # amplitude f_i o phase_i^{-1}: identical to Q^{-1}((q_i, a_i), f_i(0))
    # in the continuum but avoids the sqrt-slope discretization error
    amplitudes = [
        SampledFunction(g, np.interp(invert(p).evaluate(t), t, f.values))
        for p, f in zip(phases, fs)
    ]
    final_cost = sum(srvf_distance(mu, a) ** 2 for a in aligned)
    return RegistrationResult(
        mean_srvf=mu,
        mean_function=mean_function,
        phases=phases,
        aligned_srvfs=aligned,
        amplitudes=amplitudes,
        iterations=len(cost_trace),
        final_cost=float(final_cost),
        cost_trace=cost_trace,
        converged=converged,
    )


def _to_warp(t: np.ndarray, vals: np.ndarray) -> PiecewiseWarp:
    """Piecewise warp through (t, vals), nudged strictly increasing."""
    v = np.maximum.accumulate(np.asarray(vals, float).copy())
    n = v.size
    eps = 1e-13
    for i in range(1, n):
        if v[i] <= v[i - 1]:
            v[i] = v[i - 1] + eps
    v = np.minimum(v, 1.0)
    for i in range(n - 2, -1, -1):
        if v[i] >= v[i + 1]:
            v[i] = v[i + 1] - eps
    v[0], v[-1] = 0.0, 1.0
    return PiecewiseWarp(t, v)


def separate(fs: list[SampledFunction], **kwargs) -> RegistrationResult:
    """Full phase-amplitude decomposition of a dense sample.

    Same computation as :func:`karcher_mean`; the result satisfies
    amplitude_i o phase_i approximately equal to f_i at grid tolerance.
    """
    return karcher_mean(fs, **kwargs)
