import numpy as np

from elasticbayes.funcdata import SampledFunction, uniform_grid
from elasticbayes.warp import Warping


def two_peak(t, a1=1.0, a2=0.9):
    return (a1 * np.exp(-((t - 0.35) ** 2) / (2 * 0.05**2))
            + a2 * np.exp(-((t - 0.65) ** 2) / (2 * 0.05**2)))


def centered_warp_values(k, n, seed, theta=40.0, m=3):
    """k random warpings on shared uniform knots, with increments centered so
    the pointwise mean warping is exactly the identity."""
    rng = np.random.default_rng(seed)
    inc = rng.dirichlet(np.full(m + 1, theta / (m + 1)), size=k)
    u = 1.0 / (m + 1)
    for _ in range(50):
        inc = inc - inc.mean(axis=0) + u      # column means -> uniform
        inc = np.maximum(inc, 0.02)           # keep strictly increasing
        inc = inc / inc.sum(axis=1, keepdims=True)
        if np.max(np.abs(inc.mean(axis=0) - u)) < 1e-14:
            break
    t = np.linspace(0.0, 1.0, n)
    mat = np.stack([Warping(row).evaluate(t) for row in inc])
    return t, mat


def warped_two_peak_sample(k, n, seed):
    """Known-amplitude sample: one fixed two-peak shape composed with k
    centered random warps.  Returns (functions, truth values, warp matrix)."""
    t, warps = centered_warp_values(k, n, seed)
    g = uniform_grid(n)
    truth = two_peak(t)
    fs = [SampledFunction(g, two_peak(w)) for w in warps]
    return fs, truth, warps
