"""Observation model, prior densities and the Metropolis-within-Gibbs
posterior sampler.

The model for one subject is

    y_j = F(gamma(t_j)) + eps_j,   F = T + integral of q|q|,

with q either an empirical-basis expansion (mean SRVF plus principal
components, Gaussian coefficient prior) or a shape-restricted spline
expansion (positive coefficients, exponential prior).  Translations and
error variances are conjugate and updated by Gibbs draws; coefficients and
warping increments are updated by Metropolis-Hastings blocks whose proposal
scales adapt during burn-in only.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import gammaln

from .funcdata import Dataset, Grid, SampledFunction, uniform_grid
from .fpca import EmpiricalAmplitudeBasis
from .shapebasis import ShapeRestrictedBasis
from .warp import PhasePrior, Warping, dirichlet_logpdf, INCREMENT_FLOOR

DEFAULT_BLOCKS = ("coeffs", "warp", "T", "sigma2")


@dataclass(frozen=True)
class ShapeRestrictedPrior:
    """Shape-restricted amplitude prior: spline basis plus the rate of the
    exponential prior on the (positive) coefficients."""

    basis: ShapeRestrictedBasis
    rate: float = 0.01

    def __post_init__(self):
        if self.rate <= 0.0:
            raise ValueError("exponential rate must be positive")


@dataclass(frozen=True)
class Tying:
    """Group-level parameter sharing flags."""

    share_amplitude: bool = False
    share_translation: bool = False


@dataclass
class ModelConfig:
    amplitude_prior: EmpiricalAmplitudeBasis | ShapeRestrictedPrior
    phase_prior: PhasePrior
    tau2: float = 1.0
    alpha_sigma: float = 2.0
    beta_sigma: float = 0.02
    shared_sigma2: bool = True
    grid: Grid = field(default_factory=lambda: uniform_grid(101))
    tying: dict[str, Tying] = field(default_factory=dict)

    def __post_init__(self):
        if min(self.tau2, self.alpha_sigma, self.beta_sigma) <= 0.0:
            raise ValueError("scale hyperparameters must be positive")
        if isinstance(self.amplitude_prior, ShapeRestrictedPrior):
            H = self.amplitude_prior.basis.H
            # identifiability rule: m_gamma = H (vacuous at H = 0, where a
            # single interior knot is the minimal phase parameterization)
            if H >= 1 and self.phase_prior.m_gamma != H:
                raise ValueError(
                    f"shape-restricted prior requires m_gamma = H "
                    f"(got m_gamma={self.phase_prior.m_gamma}, H={H})"
                )
        self._amp = _make_amplitude_model(self.amplitude_prior, self.grid)

    @property
    def n_coeffs(self) -> int:
        return self._amp.dim

    @property
    def shape_restricted(self) -> bool:
        return isinstance(self.amplitude_prior, ShapeRestrictedPrior)


class _EmpiricalAmplitude:
    def __init__(self, basis: EmpiricalAmplitudeBasis, grid: Grid):
        t = grid.points
        src = basis.grid.points
        self.mean = np.interp(t, src, basis.mean_srvf.values)
        self.phi = np.stack([np.interp(t, src, row) for row in basis.basis])
        self.eigenvalues = np.asarray(basis.eigenvalues, dtype=float)
        if np.any(self.eigenvalues <= 1e-12):
            raise ValueError("empirical prior needs strictly positive eigenvalues; reduce B")
        self.dim = self.phi.shape[0]
        self.positive = False
        self.proposal_base = np.sqrt(self.eigenvalues)

    def q_values(self, c: np.ndarray) -> np.ndarray:
        return self.mean + c @ self.phi

    def log_prior(self, c: np.ndarray) -> float:
        lam = self.eigenvalues
        return float(-0.5 * np.sum(np.log(2.0 * np.pi * lam) + c**2 / lam))

    def init_coeffs(self) -> np.ndarray:
        return np.zeros(self.dim)


class _ShapeAmplitude:
    def __init__(self, prior: ShapeRestrictedPrior, grid: Grid):
        self.design = prior.basis.design_matrix(grid)
        self.rate = prior.rate
        self.dim = self.design.shape[0]
        self.positive = True
        self.proposal_base = np.ones(self.dim)

    def q_values(self, c: np.ndarray) -> np.ndarray:
        return c @ self.design

    def log_prior(self, c: np.ndarray) -> float:
        if np.any(c <= 0.0):
            return -np.inf
        return float(self.dim * np.log(self.rate) - self.rate * c.sum())

    def init_coeffs(self) -> np.ndarray:
        return np.ones(self.dim)


def _make_amplitude_model(prior, grid: Grid):
    if isinstance(prior, EmpiricalAmplitudeBasis):
        return _EmpiricalAmplitude(prior, grid)
    if isinstance(prior, ShapeRestrictedPrior):
        return _ShapeAmplitude(prior, grid)
    raise TypeError(f"unsupported amplitude prior: {type(prior).__name__}")


@dataclass(frozen=True)
class SubjectState:
    """Per-subject MCMC state."""

    c: np.ndarray
    T: float
    gamma: Warping
    sigma2: float
    cached_loglik: float = np.nan

    def __post_init__(self):
        if self.sigma2 <= 0.0:
            raise ValueError("sigma2 must be positive")


@dataclass
class SubjectDraws:
    """Retained posterior draws for one subject, one row per draw."""

    coeffs: np.ndarray
    translation: np.ndarray
    sigma2: np.ndarray
    warp_increments: np.ndarray


@dataclass
class Chain:
    subject_ids: list[str]
    draws: dict[str, SubjectDraws]
    log_posterior_trace: np.ndarray
    acceptance_rates: dict[str, float]
    seed: int
    burn_in: int
    thinning: int
    n_iter: int
    n_flagged: int = 0
    healthy: bool = True

    @property
    def n_draws(self) -> int:
        return self.log_posterior_trace.size


# ---------------------------------------------------------------------------
# model evaluation


def _mean_curve(c: np.ndarray, T: float, config: ModelConfig) -> np.ndarray:
    """F = T + int q|q| on the working grid."""
    q = config._amp.q_values(c)
    return T + cumulative_trapezoid(q * np.abs(q), config.grid.points, initial=0.0)


def predict_mean(state: SubjectState, t_obs, config: ModelConfig) -> np.ndarray:
    """Model mean F(gamma(t)) at the observation times."""
    t = t_obs.points if isinstance(t_obs, Grid) else np.asarray(t_obs, dtype=float)
    F = _mean_curve(state.c, state.T, config)
    return np.interp(state.gamma.evaluate(t), config.grid.points, F)


def _gaussian_loglik(resid: np.ndarray, sigma2: float) -> float:
    m = resid.size
    return float(-0.5 * m * np.log(2.0 * np.pi * sigma2) - np.sum(resid**2) / (2.0 * sigma2))


def log_likelihood(state: SubjectState, y: SampledFunction | None, config: ModelConfig) -> float:
    if y is None:
        return 0.0
    m = predict_mean(state, y.grid, config)
    return _gaussian_loglik(y.values - m, state.sigma2)


def invgamma_logpdf(x: float, alpha: float, beta: float) -> float:
    if x <= 0.0:
        return -np.inf
    return float(alpha * np.log(beta) - gammaln(alpha) - (alpha + 1.0) * np.log(x) - beta / x)


def log_prior(state: SubjectState, config: ModelConfig) -> float:
    lp = config._amp.log_prior(state.c)
    if not np.isfinite(lp):
        return -np.inf
    lp += dirichlet_logpdf(state.gamma.increments, config.phase_prior.alphas)
    lp += -0.5 * (np.log(2.0 * np.pi * config.tau2) + state.T**2 / config.tau2)
    lp += invgamma_logpdf(state.sigma2, config.alpha_sigma, config.beta_sigma)
    return float(lp)


def log_posterior(state: SubjectState, y: SampledFunction | None, config: ModelConfig) -> float:
    lp = log_prior(state, config)
    if not np.isfinite(lp):
        return -np.inf
    return lp + log_likelihood(state, y, config)


# ---------------------------------------------------------------------------
# single-subject updates (tying runs the pooled variants in _GroupSampler)


def gibbs_update_T(state: SubjectState, y: SampledFunction | None, config: ModelConfig,
                   rng: np.random.Generator) -> SubjectState:
    """Conjugate Normal draw for the translation."""
    if y is None:
        T = rng.normal(0.0, np.sqrt(config.tau2))
        return dataclasses.replace(state, T=float(T), cached_loglik=0.0)
    g = predict_mean(dataclasses.replace(state, T=0.0), y.grid, config)
    resid = y.values - g
    prec = resid.size / state.sigma2 + 1.0 / config.tau2
    mean = (resid.sum() / state.sigma2) / prec
    T = rng.normal(mean, np.sqrt(1.0 / prec))
    new = dataclasses.replace(state, T=float(T))
    return dataclasses.replace(new, cached_loglik=log_likelihood(new, y, config))


def gibbs_update_sigma2(state: SubjectState, y: SampledFunction | None, config: ModelConfig,
                        rng: np.random.Generator) -> SubjectState:
    """Conjugate Inverse-Gamma draw for the error variance."""
    if y is None:
        m, ss = 0, 0.0
    else:
        resid = y.values - predict_mean(state, y.grid, config)
        m, ss = resid.size, float(np.sum(resid**2))
    shape = config.alpha_sigma + m / 2.0
    scale = config.beta_sigma + ss / 2.0
    sigma2 = scale / rng.gamma(shape)
    new = dataclasses.replace(state, sigma2=float(sigma2))
    return dataclasses.replace(new, cached_loglik=log_likelihood(new, y, config))


def mh_update_coeffs(state: SubjectState, y: SampledFunction | None, config: ModelConfig,
                     rng: np.random.Generator, scale: float = 0.1,
                     log_space: bool = True) -> tuple[SubjectState, bool]:
    """Block random-walk Metropolis update of the coefficient vector.

    Empirical prior: Gaussian steps scaled per-component by sqrt(lambda_b).
    Shape-restricted prior: Gaussian steps on log(c) (positivity-preserving,
    with the change-of-variables correction); ``log_space=False`` falls back
    to direct-space steps, in which case proposals crossing zero are
    rejected by the -inf prior.
    """
    amp = config._amp
    step = rng.normal(size=amp.dim)
    correction = 0.0
    if amp.positive and log_space:
        c_new = state.c * np.exp(scale * step)
        correction = float(np.sum(np.log(c_new) - np.log(state.c)))
    else:
        c_new = state.c + scale * amp.proposal_base * step
    proposal = dataclasses.replace(state, c=c_new)
    return _mh_accept(state, proposal, y, config, rng, correction)


def mh_update_warp(state: SubjectState, y: SampledFunction | None, config: ModelConfig,
                   rng: np.random.Generator, kappa: float = 200.0) -> tuple[SubjectState, bool]:
    """Dirichlet random-walk Metropolis-Hastings update of the warping.

    Proposes p' ~ Dirichlet(kappa * p) and applies the full proposal-density
    correction q(p | p') / q(p' | p).
    """
    p = state.gamma.increments
    draw = rng.gamma(shape=np.maximum(kappa * p, INCREMENT_FLOOR))
    if np.any(draw <= 0.0) or draw.sum() <= 0.0:
        return state, False
    p_new = np.maximum(draw / draw.sum(), INCREMENT_FLOOR)
    p_new = p_new / p_new.sum()
    correction = dirichlet_logpdf(p, kappa * p_new) - dirichlet_logpdf(p_new, kappa * p)
    proposal = dataclasses.replace(state, gamma=Warping(p_new))
    return _mh_accept(state, proposal, y, config, rng, correction)


def _mh_accept(state, proposal, y, config, rng, correction: float):
    lp_cur = log_prior(state, config)
    ll_cur = state.cached_loglik
    if not np.isfinite(ll_cur):
        ll_cur = log_likelihood(state, y, config)
        state = dataclasses.replace(state, cached_loglik=ll_cur)
    lp_new = log_prior(proposal, config)
    if not np.isfinite(lp_new):
        return state, False
    ll_new = log_likelihood(proposal, y, config)
    log_ratio = (lp_new + ll_new) - (lp_cur + ll_cur) + correction
    if not np.isfinite(log_ratio):
        raise FloatingPointError("non-finite acceptance ratio")
    if np.log(rng.uniform()) < log_ratio:
        return dataclasses.replace(proposal, cached_loglik=ll_new), True
    return state, False


# ---------------------------------------------------------------------------
# chain runner


class _AdaptiveScale:
    """Robbins-Monro adaptation of a log proposal scale, burn-in only."""

    def __init__(self, value: float, target: float, increase_on_accept: bool):
        self.log_value = np.log(value)
        self.target = target
        self.sign = 1.0 if increase_on_accept else -1.0
        self.accepts = 0
        self.calls = 0

    @property
    def value(self) -> float:
        return float(np.exp(self.log_value))

    def update(self, accepted: bool, iteration: int, adapting: bool):
        self.accepts += accepted
        self.calls += 1
        if adapting:
            step = min(0.25, (iteration + 1) ** -0.6)
            self.log_value += self.sign * step * ((1.0 if accepted else 0.0) - self.target)
            self.log_value = float(np.clip(self.log_value, -20.0, 20.0))

    @property
    def rate(self) -> float:
        return self.accepts / self.calls if self.calls else 0.0


class _GroupSampler:
    """Sampler for one chain: a single subject, or a tied group."""

    def __init__(self, sids, ys, config: ModelConfig, tying: Tying,
                 rng: np.random.Generator, blocks, prior_only: bool,
                 init: dict | None = None):
        self.sids = sids
        self.ys = [None if prior_only else y for y in ys]
        self.config = config
        self.tying = tying
        self.rng = rng
        self.blocks = blocks
        amp = config._amp
        k = len(sids)

        n_c = 1 if tying.share_amplitude else k
        n_t = 1 if tying.share_translation else k
        n_s = 1 if config.shared_sigma2 else k
        init = init or {}
        self.cs = [np.array(init.get("c", amp.init_coeffs()), float) for _ in range(n_c)]
        self.Ts = [float(init.get("T", 0.0)) for _ in range(n_t)]
        self.sigma2s = [float(init.get("sigma2", config.beta_sigma / (config.alpha_sigma + 1.0)))
                        for _ in range(n_s)]
        m = config.phase_prior.m_gamma
        self.gammas = [Warping(np.full(m + 1, 1.0 / (m + 1))) for _ in range(k)]
        if "gamma" in init:
            self.gammas = [init["gamma"] for _ in range(k)]

        # data-informed translation start
        for j in range(n_t):
            ys_j = [y for i, y in enumerate(self.ys) if (n_t == 1 or i == j) and y is not None]
            if ys_j and "T" not in init:
                g0 = np.concatenate([
                    y.values - predict_mean(self._subject_state(i), y.grid, config)
                    for i, y in enumerate(self.ys) if (n_t == 1 or i == j) and y is not None
                ])
                self.Ts[j] = float(np.mean(g0))

        target_c = 0.44 if amp.dim == 1 else 0.234
        target_w = 0.44 if m + 1 == 2 else 0.234
        self.coeff_scales = [_AdaptiveScale(0.1, target_c, increase_on_accept=True)
                             for _ in range(n_c)]
        # per-coordinate scan scales (scalar acceptance target)
        self.coord_scales = [[_AdaptiveScale(0.1, 0.44, increase_on_accept=True)
                              for _ in range(amp.dim)] for _ in range(n_c)]
        self.warp_kappas = [_AdaptiveScale(200.0, target_w, increase_on_accept=False)
                            for _ in range(k)]
        self.n_flagged = 0

    # index helpers: map subject index to its parameter slot
    def _ci(self, i):
        return 0 if self.tying.share_amplitude else i

    def _ti(self, i):
        return 0 if self.tying.share_translation else i

    def _si(self, i):
        return 0 if self.config.shared_sigma2 else i

    def _subject_state(self, i, loglik=np.nan) -> SubjectState:
        return SubjectState(
            c=self.cs[self._ci(i)], T=self.Ts[self._ti(i)], gamma=self.gammas[i],
            sigma2=self.sigma2s[self._si(i)], cached_loglik=loglik,
        )

    def _pooled_loglik(self, idxs) -> float:
        return sum(log_likelihood(self._subject_state(i), self.ys[i], self.config)
                   for i in idxs)

    def _members(self, slot_of, j):
        return [i for i in range(len(self.sids)) if slot_of(i) == j]

    def sweep(self, iteration: int, adapting: bool):
        cfg, rng = self.config, self.rng
        try:
            if "coeffs" in self.blocks:
                for j in range(len(self.cs)):
                    idxs = self._members(self._ci, j)
                    self._mh_coeffs_slot(j, idxs, iteration, adapting)
                    self._mh_coeffs_scan(j, idxs, iteration, adapting)
            if "warp" in self.blocks:
                for i in range(len(self.gammas)):
                    state = self._subject_state(i)
                    new, acc = mh_update_warp(state, self.ys[i], cfg, rng,
                                              kappa=self.warp_kappas[i].value)
                    self.gammas[i] = new.gamma
                    self.warp_kappas[i].update(acc, iteration, adapting)
            if "T" in self.blocks:
                for j in range(len(self.Ts)):
                    self._gibbs_T_slot(j)
            if "sigma2" in self.blocks:
                for j in range(len(self.sigma2s)):
                    self._gibbs_sigma2_slot(j)
        except FloatingPointError:
            self.n_flagged += 1

    def _mh_coeffs_slot(self, j, idxs, iteration, adapting):
        cfg, rng, amp = self.config, self.rng, self.config._amp
        scale = self.coeff_scales[j]
        c = self.cs[j]
        step = rng.normal(size=amp.dim)
        correction = 0.0
        if amp.positive:
            c_new = c * np.exp(scale.value * step)
            correction = float(np.sum(np.log(c_new) - np.log(c)))
        else:
            c_new = c + scale.value * amp.proposal_base * step
        lp_cur = amp.log_prior(c)
        lp_new = amp.log_prior(c_new)
        accepted = False
        if np.isfinite(lp_new):
            ll_cur = self._pooled_loglik(idxs)
            self.cs[j] = c_new
            ll_new = self._pooled_loglik(idxs)
            log_ratio = (lp_new + ll_new) - (lp_cur + ll_cur) + correction
            if not np.isfinite(log_ratio):
                self.cs[j] = c
                raise FloatingPointError("non-finite acceptance ratio")
            if np.log(rng.uniform()) < log_ratio:
                accepted = True
            else:
                self.cs[j] = c
        scale.update(accepted, iteration, adapting)

    def _mh_coeffs_scan(self, j, idxs, iteration, adapting):
        """One single-coordinate random-walk pass over the coefficient
        vector; breaks up posterior correlations the block move cannot."""
        rng, amp = self.rng, self.config._amp
        ll_cur = self._pooled_loglik(idxs)
        for b in range(amp.dim):
            scale = self.coord_scales[j][b]
            c = self.cs[j]
            c_new = c.copy()
            correction = 0.0
            if amp.positive:
                c_new[b] = c[b] * np.exp(scale.value * rng.normal())
                correction = float(np.log(c_new[b]) - np.log(c[b]))
            else:
                c_new[b] = c[b] + scale.value * amp.proposal_base[b] * rng.normal()
            lp_cur = amp.log_prior(c)
            lp_new = amp.log_prior(c_new)
            accepted = False
            if np.isfinite(lp_new):
                self.cs[j] = c_new
                ll_new = self._pooled_loglik(idxs)
                log_ratio = (lp_new + ll_new) - (lp_cur + ll_cur) + correction
                if not np.isfinite(log_ratio):
                    self.cs[j] = c
                    raise FloatingPointError("non-finite acceptance ratio")
                if np.log(rng.uniform()) < log_ratio:
                    accepted = True
                    ll_cur = ll_new
                else:
                    self.cs[j] = c
            scale.update(accepted, iteration, adapting)

    def _gibbs_T_slot(self, j):
        cfg, rng = self.config, self.rng
        idxs = self._members(self._ti, j)
        prec = 1.0 / cfg.tau2
        num = 0.0
        for i in idxs:
            y = self.ys[i]
            if y is None:
                continue
            state = self._subject_state(i)
            g = predict_mean(dataclasses.replace(state, T=0.0), y.grid, cfg)
            s2 = self.sigma2s[self._si(i)]
            resid = y.values - g
            prec += resid.size / s2
            num += resid.sum() / s2
        self.Ts[j] = float(rng.normal(num / prec, np.sqrt(1.0 / prec)))

    def _gibbs_sigma2_slot(self, j):
        cfg, rng = self.config, self.rng
        idxs = self._members(self._si, j)
        m, ss = 0, 0.0
        for i in idxs:
            y = self.ys[i]
            if y is None:
                continue
            resid = y.values - predict_mean(self._subject_state(i), y.grid, cfg)
            m += resid.size
            ss += float(np.sum(resid**2))
        shape = cfg.alpha_sigma + m / 2.0
        scale = cfg.beta_sigma + ss / 2.0
        self.sigma2s[j] = float(scale / rng.gamma(shape))

    def log_posterior(self) -> float:
        lp = 0.0
        # shared parameters contribute their prior once
        for c in self.cs:
            lp += self.config._amp.log_prior(c)
        for T in self.Ts:
            lp += -0.5 * (np.log(2.0 * np.pi * self.config.tau2) + T**2 / self.config.tau2)
        for s2 in self.sigma2s:
            lp += invgamma_logpdf(s2, self.config.alpha_sigma, self.config.beta_sigma)
        for i in range(len(self.sids)):
            lp += dirichlet_logpdf(self.gammas[i].increments, self.config.phase_prior.alphas)
            lp += log_likelihood(self._subject_state(i), self.ys[i], self.config)
        return float(lp)

    def snapshot(self) -> dict[str, SubjectState]:
        return {sid: self._subject_state(i) for i, sid in enumerate(self.sids)}


def _partition(dataset: Dataset, config: ModelConfig):
    """Chain partition: tied groups when configured, else one per subject."""
    groups: dict[str, list] = {}
    order = []
    for s in dataset:
        key = s.group_id if (s.group_id is not None and s.group_id in config.tying) else f"__solo__{s.subject_id}"
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(s)
    out = []
    for key in order:
        subs = groups[key]
        tying = config.tying.get(subs[0].group_id, Tying()) if not key.startswith("__solo__") else Tying()
        out.append((key, subs, tying))
    return out


def run_chain(dataset: Dataset, config: ModelConfig, n_iter: int, burn_in: int,
              thinning: int = 1, seed: int = 0, blocks=DEFAULT_BLOCKS,
              prior_only: bool = False, init: dict | None = None) -> list[Chain]:
    """Run one MCMC chain per subject (or per tied group).

    Sweep order: coefficients, warp, translation, error variance.  Proposal
    scales adapt toward standard acceptance targets during burn-in only and
    are frozen afterwards.  Fully deterministic given the seed; per-chain
    random streams are split from the master seed as default_rng([seed, k]).
    """
    if burn_in > n_iter:
        raise ValueError("burn_in cannot exceed n_iter")
    if thinning < 1:
        raise ValueError("thinning must be at least 1")
    chains = []
    for chain_idx, (key, subs, tying) in enumerate(_partition(dataset, config)):
        rng = np.random.default_rng([seed, chain_idx])
        sids = [s.subject_id for s in subs]
        sampler = _GroupSampler(sids, [s.observation for s in subs], config, tying,
                                rng, blocks, prior_only, init=init)
        kept: list[dict[str, SubjectState]] = []
        lp_trace = []
        for it in range(n_iter):
            sampler.sweep(it, adapting=it < burn_in)
            if it >= burn_in and (it - burn_in) % thinning == 0:
                kept.append(sampler.snapshot())
                lp_trace.append(sampler.log_posterior())

        n_kept = len(kept)
        m = config.phase_prior.m_gamma
        draws = {}
        for sid in sids:
            draws[sid] = SubjectDraws(
                coeffs=np.array([snap[sid].c for snap in kept]).reshape(n_kept, config.n_coeffs),
                translation=np.array([snap[sid].T for snap in kept]),
                sigma2=np.array([snap[sid].sigma2 for snap in kept]),
                warp_increments=np.array(
                    [snap[sid].gamma.increments for snap in kept]
                ).reshape(n_kept, m + 1),
            )
        acc = {}
        for j, sc in enumerate(sampler.coeff_scales):
            acc[f"coeffs[{j}]"] = sc.rate
            for b, cs in enumerate(sampler.coord_scales[j]):
                acc[f"coeffs[{j}].c[{b}]"] = cs.rate
        for i, sc in enumerate(sampler.warp_kappas):
            acc[f"warp[{sids[i]}]"] = sc.rate
        flagged_frac = sampler.n_flagged / max(n_iter, 1)
        chains.append(Chain(
            subject_ids=sids,
            draws=draws,
            log_posterior_trace=np.array(lp_trace),
            acceptance_rates=acc,
            seed=seed,
            burn_in=burn_in,
            thinning=thinning,
            n_iter=n_iter,
            n_flagged=sampler.n_flagged,
            healthy=flagged_frac <= 0.01,
        ))
    return chains


# ---------------------------------------------------------------------------
# diagnostics


def effective_sample_size(x: np.ndarray) -> float:
    """ESS from the initial-monotone-positive-sequence autocovariance
    estimator; NaN for constant or near-empty traces."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        return np.nan
    xc = x - x.mean()
    var = np.mean(xc**2)
    if var <= 1e-300:
        return np.nan
    # FFT autocovariances
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    acov = np.fft.irfft(f * np.conjugate(f), m)[:n].real / n
    rho = acov / acov[0]
    # Geyer: sum consecutive pairs while positive and non-increasing
    tau = 1.0
    prev = np.inf
    for k in range(1, n // 2):
        pair = rho[2 * k - 1] + rho[2 * k]
        if pair < 0:
            break
        pair = min(pair, prev)
        tau += 2.0 * pair
        prev = pair
    return float(n / max(tau, 1e-12))


def split_rhat(traces: list[np.ndarray]) -> float:
    """Split-chain potential scale reduction over one or more traces."""
    halves = []
    for x in traces:
        x = np.asarray(x, dtype=float)
        h = x.size // 2
        if h < 2:
            return np.nan
        halves.append(x[:h])
        halves.append(x[x.size - h:])
    arr = np.stack([h[: min(len(h) for h in halves)] for h in halves])
    m, n = arr.shape
    means = arr.mean(axis=1)
    B = n * means.var(ddof=1)
    W = arr.var(axis=1, ddof=1).mean()
    if W <= 1e-300:
        return np.nan
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


@dataclass
class DiagnosticsReport:
    ess: dict[str, float]
    rhat: dict[str, float]
    acceptance: dict[str, float]
    n_draws: int
    warnings: list[str] = field(default_factory=list)

    @property
    def healthy(self) -> bool:
        return not self.warnings


def _param_traces(chain: Chain) -> dict[str, np.ndarray]:
    out = {}
    for sid in chain.subject_ids:
        d = chain.draws[sid]
        out[f"{sid}.T"] = d.translation
        out[f"{sid}.sigma2"] = d.sigma2
        for b in range(d.coeffs.shape[1]):
            out[f"{sid}.c[{b}]"] = d.coeffs[:, b]
        for j in range(d.warp_increments.shape[1]):
            out[f"{sid}.p[{j}]"] = d.warp_increments[:, j]
    return out


def diagnostics(chains: Chain | list[Chain]) -> DiagnosticsReport:
    """Effective sample sizes, split-R-hat (across chains when several
    seeds are given), and the acceptance-rate table."""
    if isinstance(chains, Chain):
        chains = [chains]
    if not chains or chains[0].n_draws == 0:
        raise ValueError("retained sample is empty")
    traces = [_param_traces(ch) for ch in chains]
    names = list(traces[0])
    report = DiagnosticsReport(ess={}, rhat={}, acceptance=dict(chains[0].acceptance_rates),
                               n_draws=chains[0].n_draws)
    if chains[0].n_draws < 2:
        report.warnings.append("single retained draw: diagnostics degenerate")
    for name in names:
        per = [tr[name] for tr in traces]
        ess = [effective_sample_size(x) for x in per]
        report.ess[name] = float(np.nansum(ess)) if not all(np.isnan(ess)) else np.nan
        report.rhat[name] = split_rhat(per)
        if np.isnan(report.ess[name]):
            report.warnings.append(f"{name}: constant or degenerate trace")
        elif not np.isnan(report.rhat[name]) and report.rhat[name] > 1.1:
            report.warnings.append(f"{name}: split R-hat {report.rhat[name]:.3f} > 1.1")
    for ch in chains:
        if not ch.healthy:
            report.warnings.append(
                f"chain for {ch.subject_ids}: {ch.n_flagged} flagged iterations")
    return report
