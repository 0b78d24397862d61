"""Fitting with a shape-restricted amplitude prior.

A single noisy unimodal curve is fitted with a prior that forces exactly
one peak at the change point alpha = 0.5, regardless of the data noise.
"""

import numpy as np

from elasticbayes import (Dataset, ModelConfig, PhasePrior,
                          PosteriorFunctionSample, ShapeRestrictedBasis,
                          ShapeRestrictedPrior, Subject, pointwise_estimate,
                          run_chain, uniform_grid)
from elasticbayes.sim import add_noise
from elasticbayes.funcdata import SampledFunction

rng_grid = uniform_grid(80)
t = rng_grid.points
truth = SampledFunction(rng_grid, 1.3 * np.exp(-((t - 0.45) ** 2) / (2 * 0.12**2)))
obs = add_noise(truth, sd=0.08, seed=2)

basis = ShapeRestrictedBasis(alpha=np.array([0.5]), M=-1, n_basis=6)
config = ModelConfig(
    ShapeRestrictedPrior(basis, rate=0.1),
    PhasePrior(theta_gamma=20.0, m_gamma=1),  # m_gamma = H
)

chain = run_chain(Dataset([Subject("u", obs)]), config,
                  n_iter=5000, burn_in=2000, thinning=2, seed=13)[0]
sample = PosteriorFunctionSample.from_chain(chain, "u", config)
est = pointwise_estimate(sample)

tg = config.grid.points
peak_at = tg[np.argmax(est.values)]
d = np.sign(np.diff(est.values))
n_max = int(np.sum((d[:-1] > 0) & (d[1:] < 0)))
print(f"estimate has {n_max} interior maximum (forced), located at t = {peak_at:.3f}")
print(f"true peak at t = {t[np.argmax(truth.values)]:.3f} "
      f"(the warp moves the fixed alpha = 0.5 extremum to the data's timing)")
rmse = np.sqrt(np.mean((np.interp(t, tg, est.values) - truth.values) ** 2))
print(f"RMSE vs noiseless truth: {rmse:.4f} (noise sd was 0.08)")
