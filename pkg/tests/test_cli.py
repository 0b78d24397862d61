import os

import numpy as np
import pytest

from elasticbayes.bayes import Chain, SubjectDraws
from elasticbayes.cli import (CONFIG_DEFAULTS, STUDY_DEFAULTS, CliError,
                              EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION,
                              chain_manifest, format_config, load_basis,
                              load_chain, main, parse_config, save_basis,
                              save_chain, _parse_tying)
from elasticbayes.fpca import EmpiricalAmplitudeBasis
from elasticbayes.funcdata import (Dataset, SampledFunction, Subject,
                                   save_dataset, uniform_grid)
from elasticbayes.srvf import Srvf

from conftest import two_peak


def _write_training(path, k=5, n=41, identical=False):
    g = uniform_grid(n)
    rng = np.random.default_rng(0)
    subs = []
    for i in range(k):
        if identical:
            vals = two_peak(g.points)
        else:
            a1, a2 = rng.uniform(0.7, 1.1, 2)
            vals = two_peak(g.points, a1, a2)
        subs.append(Subject(f"s{i}", SampledFunction(g, vals)))
    save_dataset(Dataset(subs), path)


def _write_held(path, n=25):
    g = uniform_grid(n)
    rng = np.random.default_rng(9)
    vals = two_peak(g.points, 0.9, 1.0) + rng.normal(0, 0.02, n)
    save_dataset(Dataset([Subject("h0", SampledFunction(g, vals))]), path)


def _fast_config(path, **extra):
    lines = {"n_iter": 120, "burn_in": 60, "n_seeds": 2, "grid_size": 41,
             "B": 2, "m_gamma": 2, "theta_gamma": 20.0}
    lines.update(extra)
    path.write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))


# ---------------------------------------------------------------------------
# configuration


def test_parse_format_round_trip():
    cfg = dict(CONFIG_DEFAULTS)
    cfg["theta_gamma"] = 12.5
    cfg["alpha"] = [0.25, 0.75]
    cfg["mode"] = "shape"
    text = format_config(cfg, CONFIG_DEFAULTS)
    back = parse_config(text, CONFIG_DEFAULTS)
    assert back == cfg


def test_parse_config_comments_and_errors():
    cfg = parse_config("# comment\n\nseed = 7  # trailing\n", CONFIG_DEFAULTS)
    assert cfg["seed"] == 7
    with pytest.raises(CliError) as e:
        parse_config("bogus_key = 1\n", CONFIG_DEFAULTS)
    assert e.value.code == EXIT_VALIDATION
    assert "line 1" in str(e.value)
    with pytest.raises(CliError):
        parse_config("seed 7\n", CONFIG_DEFAULTS)
    with pytest.raises(CliError):
        parse_config("seed = abc\n", CONFIG_DEFAULTS)


def test_parse_tying():
    out = _parse_tying("g1:amplitude+translation; g2:amplitude")
    assert out["g1"].share_amplitude and out["g1"].share_translation
    assert out["g2"].share_amplitude and not out["g2"].share_translation
    assert _parse_tying("") == {}
    with pytest.raises(CliError):
        _parse_tying("g1:bogus")
    with pytest.raises(CliError):
        _parse_tying("no-colon")


# ---------------------------------------------------------------------------
# artifacts


def _toy_basis(n=31, B=2):
    g = uniform_grid(n)
    t = g.points
    rows = np.stack([np.sqrt(2.0) * np.sin((b + 1) * np.pi * t)
                     for b in range(B)])
    return EmpiricalAmplitudeBasis(
        grid=g, mean_srvf=Srvf(g, np.ones(n)), basis=rows,
        eigenvalues=np.array([0.5, 0.1][:B]), translation_mean=0.3,
        translation_var=0.04)


def test_basis_save_load_round_trip(tmp_path):
    basis = _toy_basis()
    files = save_basis(basis)
    d = tmp_path / "prior"
    d.mkdir()
    for name, text in files.items():
        (d / name).write_text(text)
    back = load_basis(str(d))
    assert np.array_equal(back.grid.points, basis.grid.points)
    assert np.array_equal(back.mean_srvf.values, basis.mean_srvf.values)
    assert np.array_equal(back.basis, basis.basis)
    assert np.array_equal(back.eigenvalues, basis.eigenvalues)
    assert back.translation_mean == basis.translation_mean
    assert back.translation_var == basis.translation_var
    # re-serialization is byte-identical
    assert save_basis(back) == files


def test_basis_hash_mismatch(tmp_path):
    files = save_basis(_toy_basis())
    d = tmp_path / "prior"
    d.mkdir()
    for name, text in files.items():
        (d / name).write_text(text)
    # corrupt one value
    ev = (d / "eigenvalues.csv").read_text().replace("0.5", "0.6")
    (d / "eigenvalues.csv").write_text(ev)
    with pytest.raises(CliError, match="hash mismatch"):
        load_basis(str(d))


def test_chain_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    N = 7
    draws = SubjectDraws(
        coeffs=rng.normal(size=(N, 2)),
        translation=rng.normal(size=N),
        sigma2=rng.uniform(0.01, 0.1, N),
        warp_increments=rng.dirichlet([5, 5, 5], size=N),
    )
    ch = Chain(subject_ids=["s0"], draws={"s0": draws},
               log_posterior_trace=rng.normal(size=N), acceptance_rates={},
               seed=3, burn_in=10, thinning=2, n_iter=24, n_flagged=1,
               healthy=True)
    (tmp_path / "c.csv").write_text(save_chain(ch))
    (tmp_path / "m.csv").write_text(chain_manifest(ch, "deadbeef"))
    back = load_chain(str(tmp_path / "c.csv"), str(tmp_path / "m.csv"))
    d = back.draws["s0"]
    assert np.allclose(d.coeffs, draws.coeffs, atol=0, rtol=0)
    assert np.array_equal(d.translation, draws.translation)
    assert np.array_equal(d.sigma2, draws.sigma2)
    assert np.array_equal(d.warp_increments, draws.warp_increments)
    assert np.array_equal(back.log_posterior_trace, ch.log_posterior_trace)
    assert (back.seed, back.burn_in, back.thinning, back.n_iter,
            back.n_flagged, back.healthy) == (3, 10, 2, 24, 1, True)


# ---------------------------------------------------------------------------
# commands


def test_register_identical_subjects(tmp_path):
    train = tmp_path / "train.csv"
    _write_training(train, n=101, identical=True)  # matches default grid_size
    out = tmp_path / "reg"
    assert main(["register", str(train), str(out)]) == EXIT_OK
    assert (out / "resolved_config.txt").exists()
    mean = np.loadtxt(out / "mean.csv", delimiter=",", skiprows=1)
    # O(h) SRVF round-trip discretization is the only error source here
    assert np.max(np.abs(mean[:, 1] - two_peak(mean[:, 0]))) < 2e-2
    for i in range(5):
        ph = np.loadtxt(out / f"phase_s{i}.csv", delimiter=",", skiprows=1)
        assert np.max(np.abs(ph[:, 1] - ph[:, 0])) < 1e-6


def test_register_rejects_bad_inputs(tmp_path):
    out = tmp_path / "o"
    assert main(["register", str(tmp_path / "nope.csv"), str(out)]) == \
        EXIT_VALIDATION
    assert not out.exists()  # no partial outputs
    one = tmp_path / "one.csv"
    g = uniform_grid(11)
    save_dataset(Dataset([Subject("a", SampledFunction(g, g.points))]), one)
    assert main(["register", str(one), str(out)]) == EXIT_VALIDATION


def test_train_prior_and_B_limit(tmp_path):
    train = tmp_path / "train.csv"
    _write_training(train, k=4)
    out = tmp_path / "prior"
    assert main(["train-prior", str(train), str(out), "--B", "2"]) == EXIT_OK
    basis = load_basis(str(out))
    assert basis.n_components == 2
    ve = (out / "variance_explained.csv").read_text().splitlines()
    assert ve[0] == "component,cumulative_fraction"
    assert len(ve) == 3
    # B > k-1 rejected
    assert main(["train-prior", str(train), str(tmp_path / "p2"), "--B", "4"]) \
        == EXIT_VALIDATION
    assert not (tmp_path / "p2").exists()


def _run_fit(tmp_path, out_name="fit"):
    train = tmp_path / "train.csv"
    held = tmp_path / "held.csv"
    cfgf = tmp_path / "cfg.txt"
    _write_training(train)
    _write_held(held)
    _fast_config(cfgf)
    prior = tmp_path / "prior"
    code = main(["train-prior", str(train), str(prior), "--B", "2",
                 "--config", str(cfgf)])
    assert code == EXIT_OK
    out = tmp_path / out_name
    code = main(["fit", str(held), str(out), "--config", str(cfgf),
                 "--prior", str(prior)])
    return out, code


def test_fit_outputs_and_determinism(tmp_path):
    out1, code = _run_fit(tmp_path, "fit1")
    assert code == EXIT_OK
    for name in ("resolved_config.txt", "estimates_h0.csv",
                 "band_amplitude_h0.csv", "band_phase_h0.csv",
                 "band_composition_h0.csv", "diagnostics.csv",
                 "chain_s0_0.csv", "manifest_s0_0.csv",
                 "chain_s1_0.csv", "prior/meta.csv"):
        assert (out1 / name).exists(), name
    est = np.loadtxt(out1 / "estimates_h0.csv", delimiter=",", skiprows=1)
    assert est.shape == (41, 4)
    assert np.all(np.isfinite(est))
    # byte-identical rerun
    out2, code = _run_fit(tmp_path, "fit2")
    assert code == EXIT_OK
    names1 = sorted(os.path.join(r, f) for r, _, fs in os.walk(out1) for f in fs)
    for p1 in names1:
        p2 = p1.replace("fit1", "fit2")
        with open(p1, "rb") as a, open(p2, "rb") as b:
            assert a.read() == b.read(), p1


def test_fit_missing_inputs(tmp_path):
    held = tmp_path / "held.csv"
    _write_held(held)
    out = tmp_path / "fit"
    # empirical mode without a prior artifact
    assert main(["fit", str(held), str(out)]) == EXIT_VALIDATION
    assert not out.exists()
    # missing data file
    prior_out, _ = tmp_path, None
    assert main(["fit", str(tmp_path / "nope.csv"), str(out)]) == \
        EXIT_VALIDATION


def test_fit_config_artifact_mismatch(tmp_path):
    train = tmp_path / "train.csv"
    held = tmp_path / "held.csv"
    _write_training(train)
    _write_held(held)
    cfgf = tmp_path / "cfg.txt"
    _fast_config(cfgf, B=2)
    prior = tmp_path / "prior"
    main(["train-prior", str(train), str(prior), "--B", "3",
          "--config", str(cfgf)])
    out = tmp_path / "fit"
    assert main(["fit", str(held), str(out), "--config", str(cfgf),
                 "--prior", str(prior)]) == EXIT_VALIDATION
    assert not out.exists()


def test_plotdata_row_counts(tmp_path):
    fit_out, code = _run_fit(tmp_path)
    assert code == EXIT_OK
    plot = tmp_path / "plot"
    assert main(["plotdata", str(fit_out), str(plot)]) == EXIT_OK
    # 2 seeds -> 2 chains; 3 components each for subject h0
    draws_files = sorted(p.name for p in plot.iterdir()
                         if p.name.startswith("draws_"))
    assert len(draws_files) == 6
    # retained draws per chain: (120 - 60) / thinning 1 = 60; grid 41
    body = (plot / draws_files[0]).read_text().splitlines()
    assert body[0] == "draw,component,t,value"
    assert len(body) - 1 == 60 * 41
    bands = (plot / "bands_s0_0_h0.csv").read_text().splitlines()
    assert bands[0] == "component,series,t,value"
    assert len(bands) - 1 == 3 * 3 * 41
    for comp in ("amplitude", "phase", "composition"):
        for series in ("lower", "center", "upper"):
            assert any(l.startswith(f"{comp},{series},") for l in bands[1:])


def test_plotdata_missing_dir(tmp_path):
    assert main(["plotdata", str(tmp_path / "nope"), str(tmp_path / "o")]) \
        == EXIT_VALIDATION


def test_simulate_outputs_and_determinism(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("n_subjects = 5\nreplications = 2\nB = 2\n"
                    "n_iter = 150\nburn_in = 50\ngrid_size = 101\n")
    out1 = tmp_path / "sim1"
    out2 = tmp_path / "sim2"
    assert main(["simulate", str(out1), "--spec", str(spec)]) == EXIT_OK
    assert main(["evaluate", str(out2), "--spec", str(spec)]) == EXIT_OK
    assert (out1 / "resolved_spec.txt").read_text() == \
        (out2 / "resolved_spec.txt").read_text()

    def strip_wall(path):
        lines = path.read_text().splitlines()
        return [",".join(l.split(",")[:-1]) for l in lines]

    # deterministic except the wall_time_s column
    assert strip_wall(out1 / "report.csv") == strip_wall(out2 / "report.csv")
    assert (out1 / "summary.csv").read_text() == (out2 / "summary.csv").read_text()


def test_simulate_aborts_with_numerical_exit(tmp_path):
    spec = tmp_path / "spec.txt"
    # leave-one-out with 2 subjects cannot train a B=3 prior: all reps fail
    spec.write_text("n_subjects = 2\nreplications = 5\nB = 3\n"
                    "n_iter = 50\nburn_in = 10\ngrid_size = 51\n")
    out = tmp_path / "sim"
    assert main(["simulate", str(out), "--spec", str(spec)]) == EXIT_NUMERICAL
    assert not out.exists()


def test_simulate_bad_spec(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("generator = bogus\n")
    assert main(["simulate", str(tmp_path / "o"), "--spec", str(spec)]) == \
        EXIT_VALIDATION
