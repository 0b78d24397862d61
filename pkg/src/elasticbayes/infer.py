"""Posterior summaries: function-valued draws, the three point estimators
(plug-in, MAP, pointwise mean), per-component credible bands, and a
modewise split for multimodal posteriors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .align import dp_align
from .bayes import Chain, ModelConfig, SubjectState, predict_mean, _mean_curve
from .funcdata import Grid, SampledFunction
from .srvf import q_transform
from .warp import Warping

COMPONENTS = ("amplitude", "phase", "composition")


@dataclass
class PosteriorFunctionSample:
    """Per-draw amplitude functions, phases, and their compositions.

    composed_draws[j] equals amplitude_draws[j] o phase_draws[j] at grid
    tolerance; all lists share a length.
    """

    grid: Grid
    amplitude_draws: list[SampledFunction]
    phase_draws: list[Warping]
    composed_draws: list[SampledFunction]
    log_posterior: np.ndarray

    @property
    def n_draws(self) -> int:
        return len(self.composed_draws)

    def component_matrix(self, component: str = "composition") -> np.ndarray:
        """(N, n) matrix of one component evaluated on the grid."""
        t = self.grid.points
        if component == "composition":
            return np.stack([f.values for f in self.composed_draws])
        if component == "amplitude":
            return np.stack([f.values for f in self.amplitude_draws])
        if component == "phase":
            return np.stack([g.evaluate(t) for g in self.phase_draws])
        raise ValueError(f"unknown component {component!r}")

    @classmethod
    def from_chain(cls, chain: Chain, subject_id: str, config: ModelConfig,
                   t_out: Grid | None = None) -> "PosteriorFunctionSample":
        grid = t_out if t_out is not None else config.grid
        t = grid.points
        d = chain.draws[subject_id]
        amps, phases, comps = [], [], []
        for i in range(d.translation.size):
            state = _draw_state(d, i)
            F = np.interp(t, config.grid.points,
                          _mean_curve(state.c, state.T, config))
            amps.append(SampledFunction(grid, F))
            phases.append(state.gamma)
            comps.append(SampledFunction(grid, predict_mean(state, grid, config)))
        return cls(grid=grid, amplitude_draws=amps, phase_draws=phases,
                   composed_draws=comps,
                   log_posterior=chain.log_posterior_trace.copy())


def _draw_state(draws, i: int) -> SubjectState:
    return SubjectState(
        c=draws.coeffs[i],
        T=float(draws.translation[i]),
        gamma=Warping(draws.warp_increments[i]),
        sigma2=float(draws.sigma2[i]),
    )


def plug_in_estimate(chain: Chain, subject_id: str, config: ModelConfig,
                     t_out: Grid | None = None) -> SampledFunction:
    """Posterior means of the parameters plugged into the model mean.

    Warp increments are averaged on the simplex and renormalized, so the
    plug-in phase is itself a valid warping.
    """
    grid = t_out if t_out is not None else config.grid
    d = chain.draws[subject_id]
    inc = d.warp_increments.mean(axis=0)
    inc = inc / inc.sum()
    state = SubjectState(
        c=d.coeffs.mean(axis=0),
        T=float(d.translation.mean()),
        gamma=Warping(inc),
        sigma2=float(d.sigma2.mean()),
    )
    return SampledFunction(grid, predict_mean(state, grid, config))


def map_estimate(chain: Chain, subject_id: str, config: ModelConfig,
                 t_out: Grid | None = None) -> SampledFunction:
    """Curve of the retained draw with the highest log posterior; ties go
    to the smallest draw index."""
    grid = t_out if t_out is not None else config.grid
    i = int(np.argmax(chain.log_posterior_trace))
    state = _draw_state(chain.draws[subject_id], i)
    return SampledFunction(grid, predict_mean(state, grid, config))


def pointwise_estimate(sample: PosteriorFunctionSample) -> SampledFunction:
    """Pointwise posterior mean of the composed curves."""
    return SampledFunction(sample.grid,
                           sample.component_matrix("composition").mean(axis=0))


def credible_band(sample: PosteriorFunctionSample, level: float = 0.95,
                  component: str = "composition") -> tuple[np.ndarray, np.ndarray]:
    """Pointwise equal-tailed band at the given level (type-7 quantiles)."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    mat = sample.component_matrix(component)
    lo = (1.0 - level) / 2.0
    lower = np.quantile(mat, lo, axis=0, method="linear")
    upper = np.quantile(mat, 1.0 - lo, axis=0, method="linear")
    return lower, upper


def modewise_split(sample: PosteriorFunctionSample, n_modes: int,
                   max_iter: int = 100) -> list[np.ndarray]:
    """Deterministic k-medoids split of the composed draws under the
    sup-distance.

    Medoids start from a farthest-point sweep seeded at the draw with the
    smallest total distance, then alternate assignment and medoid refresh
    until fixed.  Returns the draw-index arrays of the modes, ordered by
    their smallest member index.
    """
    mat = sample.component_matrix("composition")
    N = mat.shape[0]
    if not 1 <= n_modes <= N:
        raise ValueError("n_modes must be between 1 and the number of draws")
    D = np.max(np.abs(mat[:, None, :] - mat[None, :, :]), axis=2)
    medoids = [int(np.argmin(D.sum(axis=1)))]
    while len(medoids) < n_modes:
        mind = D[:, medoids].min(axis=1)
        medoids.append(int(np.argmax(mind)))
    medoids = sorted(medoids)
    for _ in range(max_iter):
        assign = np.argmin(D[:, medoids], axis=1)
        new = []
        for k in range(n_modes):
            members = np.flatnonzero(assign == k)
            if members.size == 0:
                new.append(medoids[k])
                continue
            within = D[np.ix_(members, members)].sum(axis=1)
            new.append(int(members[np.argmin(within)]))
        new = sorted(new)
        if new == medoids:
            break
        medoids = new
    assign = np.argmin(D[:, medoids], axis=1)
    groups = [np.flatnonzero(assign == k) for k in range(n_modes)]
    groups.sort(key=lambda idx: int(idx[0]) if idx.size else N)
    return groups


def l2_error(estimate: SampledFunction, truth: SampledFunction) -> float:
    """L2 distance between two functions on the estimate's grid."""
    t = estimate.grid.points
    tv = np.interp(t, truth.grid.points, truth.values)
    return float(np.sqrt(np.trapezoid((estimate.values - tv) ** 2, t)))


def amplitude_error(estimate: SampledFunction, truth: SampledFunction,
                    window: int | None = 7) -> float:
    """Amplitude (phase-free) error: L2 distance after elastically aligning
    the estimate to the truth."""
    t = estimate.grid.points
    truth_rs = SampledFunction(estimate.grid,
                               np.interp(t, truth.grid.points, truth.values))
    gamma, _ = dp_align(q_transform(truth_rs), q_transform(estimate), window=window)
    aligned_vals = np.interp(gamma.evaluate(t), t, estimate.values)
    return float(np.sqrt(np.trapezoid((aligned_vals - truth_rs.values) ** 2, t)))
