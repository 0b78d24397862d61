"""Command-line surface: registration, prior training, model fitting,
simulation studies, and plot-ready data emission.

All configuration is a flat ``key = value`` text document; every run emits
the fully resolved configuration next to its outputs.  All outputs are CSV
(or key = value text), written only after the computation finishes, and
byte-identical across reruns with the same seed (measured wall times in
study reports are the sole documented exception).

Exit codes: 0 success (possibly with warnings), 2 validation/usage error,
3 internal numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np

from .align import separate
from .bayes import (Chain, ModelConfig, ShapeRestrictedPrior, SubjectDraws,
                    Tying, diagnostics, run_chain)
from .fpca import EmpiricalAmplitudeBasis, variance_explained, vertical_fpca
from .funcdata import (Dataset, Grid, SampledFunction, Subject,
                       ValidationError, load_dataset, resample, uniform_grid)
from .infer import (COMPONENTS, PosteriorFunctionSample, credible_band,
                    map_estimate, plug_in_estimate, pointwise_estimate)
from .shapebasis import ShapeRestrictedBasis
from .sim import FitSettings, StudySpec, run_study
from .srvf import Srvf
from .warp import PhasePrior

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

CONFIG_DEFAULTS = {
    "mode": "empirical",        # empirical | shape
    "theta_gamma": 50.0,
    "m_gamma": 3,
    "B": 3,                     # components (empirical) / spline count (shape)
    "H": 0,
    "alpha": [],                # shape-mode change points
    "M": 1,
    "tau2": 1.0,
    "alpha_sigma": 2.0,
    "beta_sigma": 0.02,
    "rate": 0.01,
    "n_iter": 2000,
    "burn_in": 500,
    "thinning": 1,
    "seed": 0,
    "n_seeds": 4,
    "grid_size": 101,
    "window": 7,
    "tying": "",                # "group:amplitude+translation;group2:amplitude"
}

STUDY_DEFAULTS = {
    "generator": "two_peak",
    "n_subjects": 10,
    "degradation": "fragment_beta",
    "beta_a": 25.0,
    "beta_b": 25.0,
    "n_points": 20,
    "noise_sd": 0.05,
    "replications": 20,
    "seed": 0,
    "grid_size": 201,
    "B": 3,
    "theta_gamma": 50.0,
    "m_gamma": 3,
    "tau2": 1.0,
    "alpha_sigma": 2.0,
    "beta_sigma": 0.02,
    "n_iter": 1500,
    "burn_in": 500,
    "thinning": 2,
    "window": 7,
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# configuration


def _coerce(key, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, list):
            inner = raw.strip("[]").strip()
            return [float(x) for x in inner.split(",")] if inner else []
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, f"config key {key!r}: bad value {raw!r} ({exc})")


def parse_config(text: str, defaults: dict) -> dict:
    """Parse a flat key = value document; unknown keys are rejected."""
    cfg = dict(defaults)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(EXIT_VALIDATION, f"config line {lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in defaults:
            raise CliError(EXIT_VALIDATION, f"config line {lineno}: unknown key {key!r}")
        cfg[key] = _coerce(key, raw, defaults[key])
    return cfg


def format_config(cfg: dict, defaults: dict) -> str:
    """Resolved configuration with every default materialized."""
    lines = []
    for key in defaults:
        v = cfg[key]
        if isinstance(v, list):
            lines.append(f"{key} = [{', '.join(_fmt(x) for x in v)}]")
        elif isinstance(v, float):
            lines.append(f"{key} = {_fmt(v)}")
        else:
            lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def config_hash(resolved_text: str) -> str:
    return hashlib.sha256(resolved_text.encode()).hexdigest()[:16]


def _parse_tying(spec: str) -> dict[str, Tying]:
    out = {}
    if not spec.strip():
        return out
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        if ":" not in part:
            raise CliError(EXIT_VALIDATION, f"tying entry {part!r}: expected group:flags")
        gid, flags = (s.strip() for s in part.split(":", 1))
        names = {f.strip() for f in flags.split("+") if f.strip()}
        bad = names - {"amplitude", "translation"}
        if bad:
            raise CliError(EXIT_VALIDATION, f"tying entry {part!r}: unknown flag {sorted(bad)}")
        out[gid] = Tying(share_amplitude="amplitude" in names,
                         share_translation="translation" in names)
    return out


def build_model_config(cfg: dict, basis: EmpiricalAmplitudeBasis | None = None) -> ModelConfig:
    if cfg["mode"] == "empirical":
        if basis is None:
            raise CliError(EXIT_VALIDATION, "empirical mode requires a basis artifact (--prior)")
        if basis.n_components != cfg["B"]:
            raise CliError(EXIT_VALIDATION,
                           f"config/artifact mismatch: config B={cfg['B']} but artifact "
                           f"has {basis.n_components} components")
        prior = basis
    elif cfg["mode"] == "shape":
        alpha = np.asarray(cfg["alpha"], dtype=float)
        if alpha.size != cfg["H"]:
            raise CliError(EXIT_VALIDATION,
                           f"shape mode: len(alpha)={alpha.size} must equal H={cfg['H']}")
        sbasis = ShapeRestrictedBasis(alpha=alpha, M=int(cfg["M"]), n_basis=int(cfg["B"]))
        prior = ShapeRestrictedPrior(sbasis, rate=cfg["rate"])
    else:
        raise CliError(EXIT_VALIDATION, f"unknown mode {cfg['mode']!r}")
    try:
        return ModelConfig(
            amplitude_prior=prior,
            phase_prior=PhasePrior(cfg["theta_gamma"], int(cfg["m_gamma"])),
            tau2=cfg["tau2"], alpha_sigma=cfg["alpha_sigma"], beta_sigma=cfg["beta_sigma"],
            grid=uniform_grid(int(cfg["grid_size"])),
            tying=_parse_tying(cfg["tying"]),
        )
    except (ValueError, ValidationError) as exc:
        raise CliError(EXIT_VALIDATION, str(exc))


# ---------------------------------------------------------------------------
# serialization


def _csv(header: str, rows) -> str:
    return header + "\n" + "\n".join(rows) + ("\n" if rows else "")


def _two_col(t: np.ndarray, v: np.ndarray, names=("t", "value")) -> str:
    rows = [f"{_fmt(a)},{_fmt(b)}" for a, b in zip(t, v)]
    return _csv(",".join(names), rows)


def save_basis(basis: EmpiricalAmplitudeBasis) -> dict[str, str]:
    """Basis artifact as a CSV bundle (relative path -> contents)."""
    files = {
        "grid.csv": _csv("t", [_fmt(x) for x in basis.grid.points]),
        "mean_srvf.csv": _csv("value", [_fmt(x) for x in basis.mean_srvf.values]),
        "basis.csv": _csv(
            ",".join(f"phi_{b}" for b in range(basis.n_components)),
            [",".join(_fmt(x) for x in col) for col in basis.basis.T],
        ),
        "eigenvalues.csv": _csv("value", [_fmt(x) for x in basis.eigenvalues]),
    }
    digest = hashlib.sha256(
        b"".join(files[k].encode() for k in sorted(files))
    ).hexdigest()
    files["meta.csv"] = _csv("key,value", [
        f"f0_mean,{_fmt(basis.translation_mean)}",
        f"tau2_hat,{_fmt(basis.translation_var)}",
        f"B,{basis.n_components}",
        f"hash,{digest}",
    ])
    return files


def load_basis(path: str) -> EmpiricalAmplitudeBasis:
    def read(name):
        p = os.path.join(path, name)
        if not os.path.exists(p):
            raise CliError(EXIT_VALIDATION, f"basis artifact missing file: {p}")
        with open(p) as fh:
            return fh.read()

    files = {name: read(name) for name in
             ("grid.csv", "mean_srvf.csv", "basis.csv", "eigenvalues.csv")}
    digest = hashlib.sha256(
        b"".join(files[k].encode() for k in sorted(files))
    ).hexdigest()
    meta = dict(line.split(",", 1) for line in read("meta.csv").splitlines()[1:])
    if meta.get("hash") != digest:
        raise CliError(EXIT_VALIDATION, f"basis artifact at {path}: hash mismatch (corrupt?)")

    def column(text):
        return np.array([float(x) for x in text.splitlines()[1:]])

    t = column(files["grid.csv"])
    grid = Grid(t)
    basis_rows = [r.split(",") for r in files["basis.csv"].splitlines()[1:]]
    phi = np.array([[float(x) for x in r] for r in basis_rows]).T
    return EmpiricalAmplitudeBasis(
        grid=grid,
        mean_srvf=Srvf(grid, column(files["mean_srvf.csv"])),
        basis=phi,
        eigenvalues=column(files["eigenvalues.csv"]),
        translation_mean=float(meta["f0_mean"]),
        translation_var=float(meta["tau2_hat"]),
    )


def save_chain(chain: Chain) -> str:
    """Chain CSV: draw,param,index,value rows for c, T, sigma2 and warp
    increments of every subject."""
    rows = []
    for sid in chain.subject_ids:
        d = chain.draws[sid]
        for i in range(d.translation.size):
            for b in range(d.coeffs.shape[1]):
                rows.append(f"{i},{sid}:c,{b},{_fmt(d.coeffs[i, b])}")
            rows.append(f"{i},{sid}:T,0,{_fmt(d.translation[i])}")
            rows.append(f"{i},{sid}:sigma2,0,{_fmt(d.sigma2[i])}")
            for j in range(d.warp_increments.shape[1]):
                rows.append(f"{i},{sid}:p,{j},{_fmt(d.warp_increments[i, j])}")
    for i, lp in enumerate(chain.log_posterior_trace):
        rows.append(f"{i},log_posterior,0,{_fmt(lp)}")
    return _csv("draw,param,index,value", rows)


def chain_manifest(chain: Chain, cfg_hash: str) -> str:
    rows = [
        f"seed,{chain.seed}",
        f"config_hash,{cfg_hash}",
        f"n_iter,{chain.n_iter}",
        f"burn_in,{chain.burn_in}",
        f"thinning,{chain.thinning}",
        f"subjects,{'|'.join(chain.subject_ids)}",
        f"n_flagged,{chain.n_flagged}",
        f"healthy,{chain.healthy}",
    ]
    return _csv("key,value", rows)


def load_chain(path: str, manifest_path: str) -> Chain:
    with open(manifest_path) as fh:
        meta = dict(line.split(",", 1) for line in fh.read().splitlines()[1:])
    sids = meta["subjects"].split("|")
    per: dict[str, dict[str, dict[int, dict[int, float]]]] = {}
    lps: dict[int, float] = {}
    with open(path) as fh:
        for line in fh.read().splitlines()[1:]:
            draw_s, param, idx_s, val_s = line.split(",")
            i, j, v = int(draw_s), int(idx_s), float(val_s)
            if param == "log_posterior":
                lps[i] = v
                continue
            sid, name = param.split(":", 1)
            per.setdefault(sid, {}).setdefault(name, {}).setdefault(i, {})[j] = v

    def block(sid, name):
        cells = per[sid][name]
        n = max(cells) + 1
        w = max(max(row) for row in cells.values()) + 1
        arr = np.empty((n, w))
        for i, row in cells.items():
            for j, v in row.items():
                arr[i, j] = v
        return arr

    draws = {
        sid: SubjectDraws(
            coeffs=block(sid, "c"),
            translation=block(sid, "T")[:, 0],
            sigma2=block(sid, "sigma2")[:, 0],
            warp_increments=block(sid, "p"),
        )
        for sid in sids
    }
    n = max(lps) + 1 if lps else 0
    return Chain(
        subject_ids=sids, draws=draws,
        log_posterior_trace=np.array([lps[i] for i in range(n)]),
        acceptance_rates={}, seed=int(meta["seed"]), burn_in=int(meta["burn_in"]),
        thinning=int(meta["thinning"]), n_iter=int(meta["n_iter"]),
        n_flagged=int(meta["n_flagged"]), healthy=meta["healthy"] == "True",
    )


def _write_all(out_dir: str, files: dict[str, str]):
    """Write every output at once; nothing is written on failure upstream."""
    os.makedirs(out_dir, exist_ok=True)
    for rel in sorted(files):
        path = os.path.join(out_dir, rel)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as fh:
            fh.write(files[rel])


# ---------------------------------------------------------------------------
# commands


def _load_config_file(path: str | None, defaults: dict) -> dict:
    if path is None:
        return dict(defaults)
    if not os.path.exists(path):
        raise CliError(EXIT_VALIDATION, f"missing config file: {path}")
    with open(path) as fh:
        return parse_config(fh.read(), defaults)


def _load_training(path: str, grid_size: int) -> tuple[Dataset, list[SampledFunction]]:
    if not os.path.exists(path):
        raise CliError(EXIT_VALIDATION, f"missing file: {path}")
    try:
        ds = load_dataset(path)
    except ValidationError as exc:
        raise CliError(EXIT_VALIDATION, str(exc))
    if len(ds) < 2:
        raise CliError(EXIT_VALIDATION, f"{path}: need at least 2 dense subjects")
    g = uniform_grid(grid_size)
    fs = []
    for s in ds:
        obs = s.observation
        if obs.grid.points.size < 5:
            raise CliError(EXIT_VALIDATION,
                           f"{path}: subject {s.subject_id} too sparse for registration")
        if obs.grid.points[0] > 1e-9 or obs.grid.points[-1] < 1.0 - 1e-9:
            raise CliError(EXIT_VALIDATION,
                           f"{path}: subject {s.subject_id} does not cover [0, 1]")
        fs.append(resample(obs, g))
    return ds, fs


def _register(training_csv: str, cfg: dict):
    ds, fs = _load_training(training_csv, int(cfg["grid_size"]))
    reg = separate(fs, window=int(cfg["window"]))
    return ds, reg


def cmd_register(args) -> int:
    cfg = _load_config_file(args.config, CONFIG_DEFAULTS)
    ds, reg = _register(args.training_csv, cfg)
    t = reg.mean_srvf.grid.points
    files = {
        "resolved_config.txt": format_config(cfg, CONFIG_DEFAULTS),
        "mean.csv": _two_col(t, reg.mean_function.values),
        "mean_srvf.csv": _two_col(t, reg.mean_srvf.values),
        "cost_trace.csv": _csv("iteration,cost", [
            f"{i},{_fmt(c)}" for i, c in enumerate(reg.cost_trace)
        ]),
    }
    for s, phase, amp in zip(ds, reg.phases, reg.amplitudes):
        files[f"phase_{s.subject_id}.csv"] = _two_col(t, phase.evaluate(t))
        files[f"amplitude_{s.subject_id}.csv"] = _two_col(t, amp.values)
    _write_all(args.out_dir, files)
    return EXIT_OK


def cmd_train_prior(args) -> int:
    cfg = _load_config_file(args.config, CONFIG_DEFAULTS)
    if args.B is not None:
        cfg["B"] = args.B
    ds, reg = _register(args.training_csv, cfg)
    k = len(ds)
    if cfg["B"] > k - 1:
        raise CliError(EXIT_VALIDATION, f"B={cfg['B']} exceeds k-1={k - 1} training limit")
    basis = vertical_fpca(reg, int(cfg["B"]))
    files = save_basis(basis)
    files["resolved_config.txt"] = format_config(cfg, CONFIG_DEFAULTS)
    files["variance_explained.csv"] = _csv("component,cumulative_fraction", [
        f"{b},{_fmt(v)}" for b, v in enumerate(variance_explained(basis))
    ])
    _write_all(args.out_dir, files)
    return EXIT_OK


def _pool_subject(chains_by_seed: list[Chain], sid: str) -> Chain:
    """Single pooled pseudo-chain for one subject across seeds."""
    parts = []
    for ch in chains_by_seed:
        if sid in ch.draws:
            parts.append((ch, ch.draws[sid]))
    ref = parts[0][0]
    pooled = SubjectDraws(
        coeffs=np.concatenate([d.coeffs for _, d in parts]),
        translation=np.concatenate([d.translation for _, d in parts]),
        sigma2=np.concatenate([d.sigma2 for _, d in parts]),
        warp_increments=np.concatenate([d.warp_increments for _, d in parts]),
    )
    return Chain(
        subject_ids=[sid], draws={sid: pooled},
        log_posterior_trace=np.concatenate(
            [ch.log_posterior_trace for ch, _ in parts]),
        acceptance_rates={}, seed=ref.seed, burn_in=ref.burn_in,
        thinning=ref.thinning, n_iter=ref.n_iter,
    )


def cmd_fit(args) -> int:
    cfg = _load_config_file(args.config, CONFIG_DEFAULTS)
    basis = None
    if args.prior is not None:
        basis = load_basis(args.prior)
    config = build_model_config(cfg, basis)
    if not os.path.exists(args.data_csv):
        raise CliError(EXIT_VALIDATION, f"missing file: {args.data_csv}")
    try:
        ds = load_dataset(args.data_csv)
    except ValidationError as exc:
        raise CliError(EXIT_VALIDATION, str(exc))

    resolved = format_config(cfg, CONFIG_DEFAULTS)
    cfg_hash = config_hash(resolved)
    seeds = [int(cfg["seed"]) + s for s in range(int(cfg["n_seeds"]))]
    per_seed: list[list[Chain]] = []
    try:
        for sd in seeds:
            per_seed.append(run_chain(
                ds, config, n_iter=int(cfg["n_iter"]), burn_in=int(cfg["burn_in"]),
                thinning=int(cfg["thinning"]), seed=sd,
            ))
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        raise CliError(EXIT_NUMERICAL, f"sampler failed: {exc}")

    files = {"resolved_config.txt": resolved}
    if basis is not None:
        for rel, text in save_basis(basis).items():
            files[os.path.join("prior", rel)] = text
    for si, chains in enumerate(per_seed):
        for ci, ch in enumerate(chains):
            files[f"chain_s{seeds[si]}_{ci}.csv"] = save_chain(ch)
            files[f"manifest_s{seeds[si]}_{ci}.csv"] = chain_manifest(ch, cfg_hash)

    t = config.grid.points
    diag_rows = []
    for s in ds:
        sid = s.subject_id
        pooled = _pool_subject([ch for chains in per_seed for ch in chains
                                if sid in ch.draws], sid)
        sample = PosteriorFunctionSample.from_chain(pooled, sid, config)
        est = {
            "plug_in": plug_in_estimate(pooled, sid, config),
            "map": map_estimate(pooled, sid, config),
            "pointwise": pointwise_estimate(sample),
        }
        files[f"estimates_{sid}.csv"] = _csv("t,plug_in,map,pointwise", [
            f"{_fmt(tt)},{_fmt(a)},{_fmt(b)},{_fmt(c)}"
            for tt, a, b, c in zip(t, est["plug_in"].values, est["map"].values,
                                   est["pointwise"].values)
        ])
        for comp in COMPONENTS:
            lo, hi = credible_band(sample, component=comp)
            center = sample.component_matrix(comp).mean(axis=0)
            files[f"band_{comp}_{sid}.csv"] = _csv("t,lower,center,upper", [
                f"{_fmt(tt)},{_fmt(a)},{_fmt(b)},{_fmt(c)}"
                for tt, a, b, c in zip(t, lo, center, hi)
            ])

    # per-seed diagnostics plus cross-seed R-hat
    subject_chains = {}
    for chains in per_seed:
        for ch in chains:
            for sid in ch.subject_ids:
                subject_chains.setdefault(sid, []).append(ch)
    warn_rows = []
    for sid, chs in subject_chains.items():
        rep = diagnostics(chs)
        for name in rep.ess:
            diag_rows.append(f"ess,{name},{_fmt(rep.ess[name])}")
            diag_rows.append(f"rhat,{name},{_fmt(rep.rhat[name])}")
        for k, v in rep.acceptance.items():
            diag_rows.append(f"acceptance,{sid}:{k},{_fmt(v)}")
        warn_rows.extend(f"warning,{sid},{w}" for w in rep.warnings)
    files["diagnostics.csv"] = _csv("kind,name,value", diag_rows + warn_rows)
    _write_all(args.out_dir, files)
    if warn_rows:
        print(f"warning: {len(warn_rows)} diagnostic warnings; see diagnostics.csv",
              file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config_file(args.spec, STUDY_DEFAULTS)
    try:
        spec = StudySpec(
            generator=cfg["generator"], n_subjects=int(cfg["n_subjects"]),
            degradation=cfg["degradation"], beta_a=cfg["beta_a"], beta_b=cfg["beta_b"],
            n_points=int(cfg["n_points"]), noise_sd=cfg["noise_sd"],
            replications=int(cfg["replications"]), seed=int(cfg["seed"]),
            grid_size=int(cfg["grid_size"]),
        )
        settings = FitSettings(
            B=int(cfg["B"]), theta_gamma=cfg["theta_gamma"], m_gamma=int(cfg["m_gamma"]),
            tau2=cfg["tau2"], alpha_sigma=cfg["alpha_sigma"], beta_sigma=cfg["beta_sigma"],
            n_iter=int(cfg["n_iter"]), burn_in=int(cfg["burn_in"]),
            thinning=int(cfg["thinning"]), window=int(cfg["window"]),
        )
    except ValueError as exc:
        raise CliError(EXIT_VALIDATION, str(exc))
    try:
        report = run_study(spec, settings)
    except RuntimeError as exc:
        raise CliError(EXIT_NUMERICAL, f"study aborted: {exc}")
    files = {
        "resolved_spec.txt": format_config(cfg, STUDY_DEFAULTS),
        "report.csv": _csv(
            "replication,estimator,l2_error,amplitude_error,wall_time_s",
            [
                f"{r['replication']},{r['estimator']},{_fmt(r['l2_error'])},"
                f"{_fmt(r['amplitude_error'])},{r['wall_time_s']:.3f}"
                for r in report.rows
            ],
        ),
        "summary.csv": _csv("metric,value", [
            f"{k},{_fmt(v)}" for k, v in report.summary.items()
        ]),
    }
    if report.failures:
        files["failures.csv"] = _csv("replication,error", [
            f"{r},{msg}" for r, msg in report.failures
        ])
    _write_all(args.out_dir, files)
    return EXIT_OK


def cmd_plotdata(args) -> int:
    fit_dir = args.fit_dir
    cfg_path = os.path.join(fit_dir, "resolved_config.txt")
    if not os.path.exists(cfg_path):
        raise CliError(EXIT_VALIDATION, f"missing input: {cfg_path}")
    with open(cfg_path) as fh:
        cfg = parse_config(fh.read(), CONFIG_DEFAULTS)
    basis = None
    if cfg["mode"] == "empirical":
        prior_dir = os.path.join(fit_dir, "prior")
        if not os.path.isdir(prior_dir):
            raise CliError(EXIT_VALIDATION, f"missing input: {prior_dir}")
        basis = load_basis(prior_dir)
    config = build_model_config(cfg, basis)
    chain_files = sorted(f for f in os.listdir(fit_dir)
                         if f.startswith("chain_") and f.endswith(".csv"))
    if not chain_files:
        raise CliError(EXIT_VALIDATION, f"no chain files found in {fit_dir}")
    t = config.grid.points
    files = {}
    for cf in chain_files:
        manifest = os.path.join(fit_dir, cf.replace("chain_", "manifest_"))
        if not os.path.exists(manifest):
            raise CliError(EXIT_VALIDATION, f"missing input: {manifest}")
        chain = load_chain(os.path.join(fit_dir, cf), manifest)
        tag = cf[len("chain_"):-len(".csv")]
        for sid in chain.subject_ids:
            sample = PosteriorFunctionSample.from_chain(chain, sid, config)
            for comp in COMPONENTS:
                mat = sample.component_matrix(comp)
                rows = [
                    f"{i},{comp},{_fmt(tt)},{_fmt(v)}"
                    for i in range(mat.shape[0])
                    for tt, v in zip(t, mat[i])
                ]
                files[f"draws_{tag}_{sid}_{comp}.csv"] = _csv(
                    "draw,component,t,value", rows)
            band_rows = []
            for comp in COMPONENTS:
                lo, hi = credible_band(sample, component=comp)
                center = sample.component_matrix(comp).mean(axis=0)
                for series, vals in (("lower", lo), ("center", center), ("upper", hi)):
                    band_rows.extend(
                        f"{comp},{series},{_fmt(tt)},{_fmt(v)}"
                        for tt, v in zip(t, vals)
                    )
            files[f"bands_{tag}_{sid}.csv"] = _csv("component,series,t,value", band_rows)
    _write_all(args.out_dir, files)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elasticbayes",
                                description="Elastic registration and Bayesian "
                                            "estimation of functions")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("register", help="phase-amplitude separation of dense curves")
    r.add_argument("training_csv")
    r.add_argument("out_dir")
    r.add_argument("--config", default=None)
    r.set_defaults(func=cmd_register)

    tp = sub.add_parser("train-prior", help="build an empirical amplitude prior")
    tp.add_argument("training_csv")
    tp.add_argument("out_dir")
    tp.add_argument("--B", type=int, default=None)
    tp.add_argument("--config", default=None)
    tp.set_defaults(func=cmd_train_prior)

    f = sub.add_parser("fit", help="posterior sampling for observed subjects")
    f.add_argument("data_csv")
    f.add_argument("out_dir")
    f.add_argument("--config", default=None)
    f.add_argument("--prior", default=None, help="basis artifact directory")
    f.set_defaults(func=cmd_fit)

    for name in ("simulate", "evaluate"):
        s = sub.add_parser(name, help="run a leave-one-out simulation study")
        s.add_argument("out_dir")
        s.add_argument("--spec", default=None)
        s.set_defaults(func=cmd_simulate)

    pd = sub.add_parser("plotdata", help="tidy per-draw CSVs from a fit directory")
    pd.add_argument("fit_dir")
    pd.add_argument("out_dir")
    pd.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
