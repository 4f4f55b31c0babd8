"""Command-line interface.

Commands print a small JSON result on stdout and report failures as a JSON
object on stderr with exit codes 1 (usage or configuration), 2 (data), and
3 (numerical failure).
"""

from __future__ import annotations

import json
import sys
import warnings
from pathlib import Path

import click
import numpy as np

from . import dataio
from .errors import (
    BaseMismatch,
    ConfigError,
    CutLocusError,
    DataFormatError,
    DegenerateCovariates,
    DegenerateInput,
    DegenerateShape,
    DomainError,
    GeodpError,
    InvalidTangent,
    MalformedRow,
    ManifoldMismatch,
    NonpositiveBudget,
    PrivacyWarning,
)
from .experiments import (
    GridSpec,
    gen_kendall,
    gen_spd,
    gen_sphere,
    make_adjacent_pairs,
    run_grid,
    validate_sensitivity,
)
from .privacy import SensitivitySpec, compose_budget
from .regression import FitConfig, fit, mse
from .sampling import ChainConfig, release_pair

_USAGE, _DATA, _NUMERIC = 1, 2, 3

_ERROR_CODES = {
    ConfigError: _USAGE,
    NonpositiveBudget: _USAGE,
    DataFormatError: _DATA,
    MalformedRow: _DATA,
    DegenerateShape: _DATA,
    DegenerateInput: _DATA,
    DegenerateCovariates: _DATA,
    ManifoldMismatch: _DATA,
    CutLocusError: _NUMERIC,
    DomainError: _NUMERIC,
    InvalidTangent: _NUMERIC,
    BaseMismatch: _NUMERIC,
}


def _emit(doc: dict) -> None:
    click.echo(json.dumps(doc, indent=2, sort_keys=True))


def _generate(manifold: str, n: int, noise: float, landmarks: int, seed: int):
    if manifold == "sphere":
        return gen_sphere(n, noise, seed)
    if manifold == "spd":
        return gen_spd(n, noise, seed)
    return gen_kendall(n, noise, seed, landmarks=landmarks)


def _generator_for(manifold: str, noise: float, landmarks: int):
    if manifold == "sphere":
        return lambda count, seed: gen_sphere(count, noise, seed)
    if manifold == "spd":
        return lambda count, seed: gen_spd(count, noise, seed)
    return lambda count, seed: gen_kendall(count, noise, seed, landmarks=landmarks)


def _chain_config(seed: int, chain_length: int, burn_in: int, eta_factor: float,
                  proposal_radius: float | None) -> ChainConfig:
    try:
        return ChainConfig(seed=seed, chain_length=chain_length, burn_in=burn_in,
                           eta_factor=eta_factor, proposal_radius=proposal_radius)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@click.group()
def cli():
    """Differentially private geodesic regression."""


@cli.command("gen-data")
@click.option("--manifold", type=click.Choice(["sphere", "spd", "kendall"]),
              default="sphere", show_default=True)
@click.option("--n", type=int, default=50, show_default=True)
@click.option("--delta", "--noise", "noise", type=float, default=0.001,
              show_default=True,
              help="Tangent noise covariance (sphere, kendall) or frame std (spd).")
@click.option("--landmarks", type=int, default=50, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--from-landmarks", "landmark_file", type=click.Path(), default=None,
              help="Ingest a landmark CSV instead of generating synthetic data.")
@click.option("--covariate-column", default="0",
              help="Covariate column name or index in the landmark CSV.")
@click.option("--out", type=click.Path(), required=True)
def gen_data(manifold, n, noise, landmarks, seed, landmark_file, covariate_column, out):
    """Write a dataset file, synthetic or ingested from landmarks."""
    if landmark_file is not None:
        column = int(covariate_column) if covariate_column.isdigit() else covariate_column
        data = dataio.ingest_landmarks(landmark_file, column)
        truth = None
    else:
        if n < 2:
            raise ConfigError("n must be at least 2")
        if noise < 0:
            raise ConfigError("noise must be nonnegative")
        data, truth = _generate(manifold, n, noise, landmarks, seed)
    dataio.write_dataset(out, data)
    doc = {"path": str(out), "manifold": data.manifold.spec(), "n": data.n}
    if truth is not None:
        doc["truth"] = {
            "p": dataio._row_to_file(data.manifold, truth.p.coords),
            "v": dataio._row_to_file(data.manifold, truth.v.components),
        }
    _emit(doc)


@cli.command("fit")
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.option("--max-iter", type=int, default=2000, show_default=True)
@click.option("--out", type=click.Path(), default=None,
              help="Optional path for the fitted model JSON.")
def fit_cmd(data_path, tol, max_iter, out):
    """Fit a geodesic to a dataset and print the report."""
    data = dataio.read_dataset(data_path)
    report = fit(data, FitConfig(tol=tol, max_iter=max_iter))
    doc = dataio.encode_model(report.model, report)
    if out:
        dataio.write_model(out, report.model, report)
        doc["path"] = str(out)
    _emit(doc)


@cli.command("privatize")
@click.option("--data", "data_path", type=click.Path(), required=True)
@click.option("--eps-p", type=float, required=True)
@click.option("--eps-v", type=float, required=True)
@click.option("--tau", type=float, default=None,
              help="Public residual bound; defaults to the empirical bound "
                   "with a privacy warning.")
@click.option("--factor", type=click.Choice(["1", "2"]), default="1", show_default=True)
@click.option("--chain-length", type=int, default=5000, show_default=True)
@click.option("--burn-in", type=int, default=1000, show_default=True)
@click.option("--eta-factor", type=float, default=1.0, show_default=True)
@click.option("--proposal-radius", type=float, default=None)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True)
def privatize(data_path, eps_p, eps_v, tau, factor, chain_length, burn_in,
              eta_factor, proposal_radius, seed, out):
    """Release a differentially private geodesic model."""
    data = dataio.read_dataset(data_path)
    report = fit(data)
    if tau is None:
        tau_policy = "empirical"
        tau_val = report.tau_empirical
        warnings.warn(
            "using the empirical residual bound as tau; the release is only "
            "differentially private if tau is a public constant",
            PrivacyWarning,
            stacklevel=1,
        )
    else:
        tau_policy = "public"
        tau_val = tau
        if not tau_val > 0:
            raise ConfigError("tau must be positive")
    man = data.manifold
    kappa_l = man.curvature_bounds[0]
    spec = SensitivitySpec(
        n=data.n, tau=tau_val, kappa_l=kappa_l,
        tau_m=report.tau_m_empirical if kappa_l < 0 else 0.0,
    )
    budget = compose_budget(eps_p, eps_v)
    cfg = _chain_config(seed, chain_length, burn_in, eta_factor, proposal_radius)
    release = release_pair(data, report, spec, budget, cfg, factor=int(factor))
    extra = {"mse": mse(release.model, data), "fit_mse": 2.0 * report.energy}
    dataio.write_release(out, release, tau_policy, extra)
    _emit({
        "path": str(out),
        "eps_p": budget.eps_p,
        "eps_v": budget.eps_v,
        "total": budget.total,
        "tau_policy": tau_policy,
        "mse": extra["mse"],
        "acceptance_p": release.diagnostics_p.acceptance_rate,
        "acceptance_v": release.diagnostics_v.acceptance_rate,
    })


def _parse_eps_range(text: str) -> dict:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--eps must look like LO:HI:STEPS")
    try:
        return {"lo": float(parts[0]), "hi": float(parts[1]), "steps": int(parts[2])}
    except ValueError as exc:
        raise ConfigError(f"bad --eps range {text!r}") from exc


_EQUAL_DEFAULT = {"lo": 0.2, "hi": 2.0, "steps": 10}
_UNEQUAL_DEFAULT = {"total": 2.02, "lo": 0.02, "hi": 2.0, "steps": 10}


@cli.command("experiment")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config; explicit flags override its keys.")
@click.option("--manifold", type=click.Choice(["sphere", "spd", "kendall"]), default=None)
@click.option("--n", type=int, default=None)
@click.option("--delta", "--noise", "noise", type=float, default=None)
@click.option("--landmarks", type=int, default=None)
@click.option("--mode", type=click.Choice(["equal", "unequal"]), default=None)
@click.option("--eps", default=None, help="Budget range LO:HI:STEPS.")
@click.option("--total", type=float, default=None,
              help="Fixed total budget for unequal mode.")
@click.option("--m", type=int, default=None)
@click.option("--tau", type=float, default=None)
@click.option("--factor", type=click.Choice(["1", "2"]), default=None)
@click.option("--replicates", type=int, default=None)
@click.option("--chain-length", type=int, default=None)
@click.option("--burn-in", type=int, default=None)
@click.option("--eta-factor", type=float, default=None)
@click.option("--proposal-radius", type=float, default=None)
@click.option("--seed", type=int, required=True)
@click.option("--out-dir", type=click.Path(), required=True)
def experiment(config_path, manifold, n, noise, landmarks, mode, eps, total, m,
               tau, factor, replicates, chain_length, burn_in, eta_factor,
               proposal_radius, seed, out_dir):
    """Run a budget-grid experiment from a config file and/or flags."""
    doc = dataio.load_experiment_doc(config_path) if config_path else {}
    if manifold is not None:
        spec = {"kind": manifold}
        if landmarks is not None and manifold == "kendall":
            spec["landmarks"] = landmarks
        doc["manifold"] = spec
    elif landmarks is not None and doc.get("manifold", {}).get("kind") == "kendall":
        doc["manifold"]["landmarks"] = landmarks
    if n is not None:
        doc["n"] = n
    if noise is not None:
        doc["noise"] = noise
    if mode is not None:
        doc["mode"] = mode
    if eps is not None:
        doc["budgets"] = _parse_eps_range(eps)
    if total is not None:
        doc.setdefault("budgets", dict(_UNEQUAL_DEFAULT))
        doc["budgets"]["total"] = total
    if m is not None:
        doc["m"] = m
    if tau is not None:
        doc["tau"] = tau
    if factor is not None:
        doc["factor"] = int(factor)
    if replicates is not None:
        doc["replicates"] = replicates
    chain_flags = {"chain_length": chain_length, "burn_in": burn_in,
                   "eta_factor": eta_factor, "proposal_radius": proposal_radius}
    given = {k: v for k, v in chain_flags.items() if v is not None}
    if given:
        doc.setdefault("chain", {}).update(given)
    # Fill the grid defaults so a flags-only invocation works.
    doc.setdefault("manifold", {"kind": "sphere"})
    doc.setdefault("n", 50)
    doc.setdefault("noise", 0.001)
    doc.setdefault("mode", "equal")
    if "budgets" not in doc:
        doc["budgets"] = dict(_EQUAL_DEFAULT if doc["mode"] == "equal"
                              else _UNEQUAL_DEFAULT)
    elif doc["mode"] == "unequal" and "total" not in doc["budgets"]:
        doc["budgets"]["total"] = _UNEQUAL_DEFAULT["total"]

    cfg = dataio.parse_experiment_config(doc)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    man_spec = cfg.manifold
    landmarks = man_spec.get("landmarks", 50)
    generator = _generator_for(man_spec["kind"], cfg.noise, landmarks)
    chain = dict(cfg.chain)
    chain.setdefault("chain_length", 5000)
    chain.setdefault("burn_in", 1000)
    chain.setdefault("eta_factor", 1.0)
    chain.setdefault("proposal_radius", None)

    seeds = [int(s.generate_state(1)[0]) for s in
             np.random.SeedSequence(seed).spawn(cfg.replicates)]
    results = []
    for rep_seed in seeds:
        data, _ = generator(cfg.n, rep_seed)
        grid = GridSpec(mode=cfg.mode, budget_list=cfg.budget_list(), m=cfg.m,
                        replicate_seeds=[rep_seed])
        chain_cfg = _chain_config(rep_seed, chain["chain_length"], chain["burn_in"],
                                  chain["eta_factor"], chain["proposal_radius"])
        results.append(run_grid(data, grid, chain_cfg, tau=cfg.tau, factor=cfg.factor))

    (out / "grid.csv").write_text(dataio.grid_csv_text(results))
    (out / "plot.csv").write_text(dataio.plot_csv_text(results))
    summary = {
        "manifold": man_spec,
        "n": cfg.n,
        "mode": cfg.mode,
        "m": cfg.m,
        "replicates": cfg.replicates,
        "seeds": seeds,
        "tau_policy": results[0].tau_policy,
        "cells_per_replicate": len(results[0].cells),
        "baseline_ln_mse": [r.baseline_ln_mse for r in results],
        "config_hash": dataio.config_hash({
            "manifold": man_spec, "n": cfg.n, "noise": cfg.noise, "mode": cfg.mode,
            "budgets": cfg.budgets, "m": cfg.m, "chain": chain, "tau": cfg.tau,
            "factor": cfg.factor, "seed": seed, "replicates": cfg.replicates,
        }),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _emit({"out_dir": str(out), "replicates": cfg.replicates,
           "cells": sum(len(r.cells) for r in results)})


@cli.command("validate-sensitivity")
@click.option("--manifold", type=click.Choice(["sphere", "spd", "kendall"]),
              default="sphere", show_default=True)
@click.option("--n", type=int, default=20, show_default=True)
@click.option("--delta", "--noise", "noise", type=float, default=0.001,
              show_default=True)
@click.option("--landmarks", type=int, default=50, show_default=True)
@click.option("--trials", type=int, default=20, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(), required=True)
def validate_sensitivity_cmd(manifold, n, noise, landmarks, trials, seed, out):
    """Check the sensitivity bounds against adjacent-dataset gradient swings."""
    if trials < 1:
        raise ConfigError("trials must be positive")
    generator = _generator_for(manifold, noise, landmarks)
    pairs = make_adjacent_pairs(n, generator, trials, seed)
    report = validate_sensitivity(pairs)
    Path(out).write_text(dataio.sensitivity_csv_text(report))
    _emit({
        "path": str(out),
        "trials": trials,
        "min_ratio": report.min_ratio,
        "all_bounded": report.all_bounded(),
    })


def main(argv=None) -> int:
    warnings.simplefilter("always", PrivacyWarning)
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        _fail("UsageError", exc.format_message(), _USAGE)
        return _USAGE
    except click.ClickException as exc:
        _fail(type(exc).__name__, exc.format_message(), _USAGE)
        return _USAGE
    except GeodpError as exc:
        code = _ERROR_CODES.get(type(exc), _NUMERIC)
        _fail(type(exc).__name__, str(exc), code)
        return code
    except FileNotFoundError as exc:
        _fail("FileNotFoundError", str(exc), _DATA)
        return _DATA
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        _fail(type(exc).__name__, str(exc), _NUMERIC)
        return _NUMERIC


def _fail(name: str, message: str, code: int) -> None:
    print(json.dumps({"error": name, "message": message, "exit_code": code}),
          file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
