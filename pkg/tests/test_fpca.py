import numpy as np
import pytest

from elasticbayes.align import RegistrationResult, karcher_mean
from elasticbayes.fpca import (EmpiricalAmplitudeBasis, generative_draw,
                               project, reconstruct, variance_explained,
                               vertical_fpca)
from elasticbayes.funcdata import SampledFunction, uniform_grid
from elasticbayes.srvf import Srvf, q_inverse, q_transform
from elasticbayes.warp import identity_warp

from conftest import two_peak


def _synthetic_reg(grid, srvf_rows, mean_values):
    """Build a RegistrationResult directly from aligned SRVF rows, so the
    fPCA can be tested against hand-constructed covariance structure."""
    t = grid.points
    aligned = [Srvf(grid, row) for row in srvf_rows]
    amps = [q_inverse(q, 0.0) for q in aligned]
    return RegistrationResult(
        mean_srvf=Srvf(grid, mean_values),
        mean_function=q_inverse(Srvf(grid, mean_values), 0.0),
        phases=[identity_warp() for _ in aligned],
        aligned_srvfs=aligned,
        amplitudes=amps,
        iterations=1,
        final_cost=0.0,
    )


def test_basis_orthonormal_under_trapezoid():
    fs = [SampledFunction(uniform_grid(201),
                          two_peak(uniform_grid(201).points, a1, a2))
          for a1, a2 in [(1.0, 0.9), (0.8, 1.1), (1.2, 0.7), (0.9, 1.0),
                         (1.1, 0.8), (0.7, 1.2)]]
    reg = karcher_mean(fs)
    basis = vertical_fpca(reg, B=4)
    t = basis.grid.points
    G = np.array([[np.trapezoid(p * q, t) for q in basis.basis]
                  for p in basis.basis])
    assert np.max(np.abs(G - np.eye(4))) < 1e-8
    assert np.all(np.diff(basis.eigenvalues) <= 1e-12)
    assert np.all(basis.eigenvalues >= 0.0)


def test_rank_one_recovery():
    # data = mu + c_i * phi with known phi and scores: fPCA must recover
    # (lambda, phi) exactly up to sign
    g = uniform_grid(301)
    t = g.points
    mu = np.cos(np.pi * t)
    phi = np.sqrt(2.0) * np.sin(np.pi * t)  # unit L2 norm on [0,1]
    scores = np.array([-1.5, -0.5, 0.25, 0.75, 1.0])
    rows = [mu + c * phi for c in scores]
    reg = _synthetic_reg(g, rows, mu)
    basis = vertical_fpca(reg, B=2)
    lam = scores.var(ddof=1)  # scores not centered? mean = 0 exactly
    assert abs(scores.mean()) < 1e-12
    assert basis.eigenvalues[0] == pytest.approx(lam, abs=1e-8)
    assert basis.eigenvalues[1] == pytest.approx(0.0, abs=1e-10)
    sign = np.sign(np.trapezoid(basis.basis[0] * phi, t))
    assert np.max(np.abs(sign * basis.basis[0] - phi)) < 1e-6


def test_two_component_eigenvalues():
    g = uniform_grid(401)
    t = g.points
    phi1 = np.sqrt(2.0) * np.sin(2 * np.pi * t)
    phi2 = np.sqrt(2.0) * np.cos(2 * np.pi * t)
    rng = np.random.default_rng(0)
    c1 = rng.normal(0, 2.0, size=40)
    c2 = rng.normal(0, 0.5, size=40)
    c1 -= c1.mean()
    c2 -= c2.mean()
    rows = [a * phi1 + b * phi2 for a, b in zip(c1, c2)]
    reg = _synthetic_reg(g, rows, np.zeros(t.size))
    basis = vertical_fpca(reg, B=3)
    # phi1/phi2 are orthonormal, so eigenvalues are the empirical variances
    # of the (nearly uncorrelated) scores to good accuracy
    assert basis.eigenvalues[0] == pytest.approx(c1.var(ddof=1), rel=1e-2)
    assert basis.eigenvalues[1] == pytest.approx(c2.var(ddof=1), rel=1e-2)
    assert basis.eigenvalues[2] < 1e-8


def test_project_reconstruct_round_trip():
    g = uniform_grid(301)
    t = g.points
    mu = np.cos(np.pi * t)
    phi = np.sqrt(2.0) * np.sin(np.pi * t)
    rows = [mu + c * phi for c in (-1.0, -0.25, 0.25, 1.0)]
    reg = _synthetic_reg(g, rows, mu)
    basis = vertical_fpca(reg, B=1)
    q = Srvf(g, mu + 0.6 * phi)
    c = project(q, basis)
    assert c.shape == (1,)
    assert abs(abs(c[0]) - 0.6) < 1e-6
    back = reconstruct(c, basis)
    assert np.max(np.abs(back.values - q.values)) < 1e-6


def test_reconstruction_error_monotone_in_B():
    fs = [SampledFunction(uniform_grid(201),
                          two_peak(uniform_grid(201).points, a1, a2) + 0.2 * a2)
          for a1, a2 in [(1.0, 0.9), (0.8, 1.1), (1.2, 0.7), (0.9, 1.0),
                         (1.1, 0.8), (0.7, 1.2), (1.0, 1.0)]]
    reg = karcher_mean(fs)
    t = reg.mean_srvf.grid.points
    errs = []
    for B in range(1, 6):
        basis = vertical_fpca(reg, B)
        tot = 0.0
        for q in reg.aligned_srvfs:
            r = reconstruct(project(q, basis), basis)
            tot += np.trapezoid((r.values - q.values) ** 2, t)
        errs.append(tot)
    assert all(errs[i + 1] <= errs[i] + 1e-10 for i in range(len(errs) - 1))


def test_full_rank_reconstruction_exact_about_sample_mean():
    # centered about the sample mean, k rows span <= k-1 dimensions, so the
    # B = k-1 basis reconstructs the training sample exactly
    g = uniform_grid(201)
    t = g.points
    rng = np.random.default_rng(4)
    rows = np.stack([np.sin(2 * np.pi * t) + rng.normal(0, 0.3, t.size)
                     for _ in range(5)])
    mu = rows.mean(axis=0)
    reg = _synthetic_reg(g, rows, mu)
    basis = vertical_fpca(reg, B=4)
    for q in reg.aligned_srvfs:
        r = reconstruct(project(q, basis), basis)
        assert np.max(np.abs(r.values - q.values)) < 1e-8


def test_variance_explained_cumulative():
    g = uniform_grid(101)
    basis = EmpiricalAmplitudeBasis(
        grid=g, mean_srvf=Srvf(g, np.zeros(101)),
        basis=np.zeros((3, 101)), eigenvalues=np.array([3.0, 1.0, 0.0]),
        translation_mean=0.0, translation_var=1.0)
    assert np.allclose(variance_explained(basis), [0.75, 1.0, 1.0])


def test_generative_draw_moments():
    g = uniform_grid(201)
    t = g.points
    mu = np.zeros(t.size)
    phi = np.sqrt(2.0) * np.sin(np.pi * t)
    basis = EmpiricalAmplitudeBasis(
        grid=g, mean_srvf=Srvf(g, mu), basis=phi[None, :],
        eigenvalues=np.array([0.49]), translation_mean=2.0,
        translation_var=0.25)
    draws = [generative_draw(basis, [3, i]) for i in range(4000)]
    starts = np.array([d.values[0] for d in draws])
    assert abs(starts.mean() - 2.0) < 0.05
    assert abs(starts.var() - 0.25) / 0.25 < 0.05
    # score variance: recover c from each draw's SRVF
    cs = np.array([project(q_transform(d), basis)[0] for d in draws])
    assert abs(cs.var() - 0.49) / 0.49 < 0.05


def test_B_too_large_rejected():
    g = uniform_grid(51)
    rows = [np.sin((i + 1) * g.points) for i in range(4)]
    reg = _synthetic_reg(g, rows, np.zeros(51))
    with pytest.raises(ValueError):
        vertical_fpca(reg, B=4)  # k-1 = 3
    with pytest.raises(ValueError):
        vertical_fpca(_synthetic_reg(g, rows[:1], np.zeros(51)), B=1)
