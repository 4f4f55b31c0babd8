"""File formats: dataset JSON, release JSON, experiment configs, result CSVs,
and raw landmark ingestion.

Floats are serialized with Python's shortest round-trip representation, so a
write/read cycle reproduces coordinates bit for bit and rewriting an unchanged
object reproduces the file byte for byte.  SPD rows are stored as the three
free entries (a, b, c) of the symmetric matrix; Kendall rows store landmarks
as interleaved (re, im) pairs.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DataFormatError,
    DegenerateShape,
    MalformedRow,
)
from .geometry import Manifold
from .manifolds import KendallPreshape, SPD, manifold_from_spec
from .privacy import sensitivity_p, sensitivity_v
from .regression import Dataset, FitReport, GeodesicModel, scale_covariates
from .sampling import PrivateRelease

_DATASET_FORMAT = "geodp-dataset"
_MODEL_FORMAT = "geodp-model"
_RELEASE_FORMAT = "geodp-release"
_VERSION = 1


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def config_hash(obj) -> str:
    """Stable hash of a JSON-serializable object."""
    return hashlib.sha256(
        json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


# --- coordinate row codecs ---------------------------------------------------------


def _row_to_file(man: Manifold, row: np.ndarray) -> list[float]:
    if isinstance(man, SPD):
        return [float(row[0]), float(row[1]), float(row[3])]
    return [float(c) for c in row]


def _row_from_file(man: Manifold, vals) -> np.ndarray:
    vals = [float(v) for v in vals]
    if isinstance(man, SPD):
        if len(vals) != 3:
            raise DataFormatError(f"spd rows need 3 entries (a, b, c), got {len(vals)}")
        a, b, c = vals
        return np.array([a, b, b, c])
    if len(vals) != man.ambient_dim:
        raise DataFormatError(
            f"{man.kind} rows need {man.ambient_dim} entries, got {len(vals)}"
        )
    return np.array(vals)


# --- dataset files -----------------------------------------------------------------


def encode_dataset(data: Dataset) -> dict:
    return {
        "format": _DATASET_FORMAT,
        "version": _VERSION,
        "manifold": data.manifold.spec(),
        "n": data.n,
        "x": [float(v) for v in data.x],
        "y": [_row_to_file(data.manifold, row) for row in data.y],
    }


def decode_dataset(doc: dict) -> Dataset:
    try:
        if doc.get("format") != _DATASET_FORMAT:
            raise DataFormatError(f"not a dataset file: format={doc.get('format')!r}")
        if doc.get("version") != _VERSION:
            raise DataFormatError(f"unsupported dataset version {doc.get('version')!r}")
        man = manifold_from_spec(doc["manifold"])
        x = np.array([float(v) for v in doc["x"]])
        y = np.stack([_row_from_file(man, row) for row in doc["y"]])
        if doc.get("n") != len(x):
            raise DataFormatError("declared n does not match the covariate count")
        return Dataset(x, y, man)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"malformed dataset file: {exc}") from exc


def write_dataset(path, data: Dataset) -> None:
    Path(path).write_text(_dumps(encode_dataset(data)))


def read_dataset(path) -> Dataset:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"dataset file is not valid JSON: {exc}") from exc
    return decode_dataset(doc)


# --- model and release files ----------------------------------------------------------


def encode_model(model: GeodesicModel, report: FitReport | None = None) -> dict:
    doc = {
        "format": _MODEL_FORMAT,
        "version": _VERSION,
        "manifold": model.manifold.spec(),
        "p": _row_to_file(model.manifold, model.p.coords),
        "v": _row_to_file(model.manifold, model.v.components),
    }
    if report is not None:
        doc["fit"] = {
            "energy": report.energy,
            "mse": 2.0 * report.energy,
            "iterations": report.iterations,
            "converged": report.converged,
            "tau_empirical": report.tau_empirical,
            "tau_m_empirical": report.tau_m_empirical,
            "gradient_norm_p": report.gradient_norms[0],
            "gradient_norm_v": report.gradient_norms[1],
            "ball_ok": report.ball_ok,
        }
    return doc


def decode_model(doc: dict) -> GeodesicModel:
    try:
        if doc.get("format") != _MODEL_FORMAT:
            raise DataFormatError(f"not a model file: format={doc.get('format')!r}")
        man = manifold_from_spec(doc["manifold"])
        p = man.point(man._project(_row_from_file(man, doc["p"])))
        v = man.project_to_tangent(p, _row_from_file(man, doc["v"]))
        return GeodesicModel(p, v)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"malformed model file: {exc}") from exc


def write_model(path, model: GeodesicModel, report: FitReport | None = None) -> None:
    Path(path).write_text(_dumps(encode_model(model, report)))


def _diag_dict(diag) -> dict:
    return {
        "acceptance_rate": diag.acceptance_rate,
        "accepted": diag.accepted,
        "proposals": diag.proposals,
        "final_logdensity": diag.final_logdensity,
        "samples_kept": diag.samples_kept,
        "eta": diag.eta,
        "stuck": diag.stuck,
        "healthy": diag.healthy,
    }


def encode_release(release: PrivateRelease, tau_policy: str, extra: dict | None = None) -> dict:
    man = release.model.manifold
    cfg = release.chain_config
    inputs = {
        "manifold": man.spec(),
        "budget": {"eps_p": release.budget.eps_p, "eps_v": release.budget.eps_v},
        "sensitivity": {
            "n": release.spec.n,
            "tau": release.spec.tau,
            "tau_m": release.spec.tau_m,
            "kappa_l": release.spec.kappa_l,
        },
        "factor": release.scales.factor,
        "chain": {
            "chain_length": cfg.chain_length,
            "burn_in": cfg.burn_in,
            "proposal_radius": cfg.proposal_radius,
            "eta_factor": cfg.eta_factor,
        },
        "seed": release.seed,
    }
    doc = {
        "format": _RELEASE_FORMAT,
        "version": _VERSION,
        "manifold": man.spec(),
        "p": _row_to_file(man, release.model.p.coords),
        "v": _row_to_file(man, release.model.v.components),
        "budget": {
            "eps_p": release.budget.eps_p,
            "eps_v": release.budget.eps_v,
            "total": release.budget.total,
        },
        "sensitivity": {
            "n": release.spec.n,
            "tau": release.spec.tau,
            "tau_m": release.spec.tau_m,
            "kappa_l": release.spec.kappa_l,
            "delta_p": sensitivity_p(release.spec),
            "delta_v": sensitivity_v(release.spec),
        },
        "scales": {
            "sigma_p": release.scales.sigma_p,
            "sigma_v": release.scales.sigma_v,
            "factor": release.scales.factor,
        },
        "chain": inputs["chain"],
        "seed": release.seed,
        "tau_policy": tau_policy,
        "diagnostics": {
            "p": _diag_dict(release.diagnostics_p),
            "v": _diag_dict(release.diagnostics_v),
        },
        "config_hash": config_hash(inputs),
    }
    if extra:
        doc.update(extra)
    return doc


def write_release(path, release: PrivateRelease, tau_policy: str,
                  extra: dict | None = None) -> None:
    Path(path).write_text(_dumps(encode_release(release, tau_policy, extra)))


# --- landmark ingestion -----------------------------------------------------------------


def ingest_landmarks(path, covariate_column) -> Dataset:
    """Read a landmark CSV into a Kendall shape dataset.

    The file needs a header row.  One column (by name or index) holds the
    covariate; the remaining columns are landmark coordinates in
    (x0, y0, x1, y1, ...) order.  Every row is centered and scaled to a
    preshape, and the covariates are rescaled to span [0, 1].
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("landmark file is empty") from None
        header = [h.strip() for h in header]
        if isinstance(covariate_column, int):
            cov_idx = covariate_column
            if not 0 <= cov_idx < len(header):
                raise DataFormatError(f"covariate column {covariate_column} out of range")
        else:
            if covariate_column not in header:
                raise DataFormatError(f"covariate column {covariate_column!r} not in header")
            cov_idx = header.index(covariate_column)
        coord_count = len(header) - 1
        if coord_count % 2 != 0:
            raise DataFormatError("landmark columns must come in (x, y) pairs")
        k = coord_count // 2
        if k < 4:
            raise DataFormatError("kendall shapes need at least 4 landmarks")

        man = KendallPreshape(k)
        covs, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise MalformedRow(
                    f"line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise MalformedRow(f"line {lineno}: {exc}") from exc
            covs.append(vals[cov_idx])
            coords = np.array(vals[:cov_idx] + vals[cov_idx + 1:])
            z = coords.reshape(k, 2).astype(float)
            z = z - z.mean(axis=0)
            norm = float(np.linalg.norm(z))
            if norm < 1e-12:
                raise DegenerateShape(f"line {lineno}: landmarks coincide")
            rows.append((z / norm).reshape(-1))

    if len(rows) < 2:
        raise DataFormatError("landmark file needs at least two data rows")
    return Dataset(scale_covariates(np.array(covs)), np.stack(rows), man)


# --- experiment configuration --------------------------------------------------------------


@dataclass
class ExperimentConfig:
    manifold: dict
    n: int
    noise: float
    mode: str
    budgets: dict
    m: int = 10
    chain: dict = field(default_factory=dict)
    tau: float | None = None
    factor: int = 1
    replicates: int = 1

    def budget_list(self) -> list[tuple[float, float]]:
        from .experiments import equal_split_budgets, unequal_split_budgets

        b = self.budgets
        if self.mode == "equal":
            return equal_split_budgets(b["lo"], b["hi"], b["steps"])
        return unequal_split_budgets(b["total"], b["lo"], b["hi"], b["steps"])


_CONFIG_KEYS = {"manifold", "n", "noise", "mode", "budgets", "m", "chain", "tau",
                "factor", "replicates"}
_CHAIN_KEYS = {"chain_length", "burn_in", "eta_factor", "proposal_radius"}
_EQUAL_BUDGET_KEYS = {"lo", "hi", "steps"}
_UNEQUAL_BUDGET_KEYS = {"total", "lo", "hi", "steps"}


def parse_experiment_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("experiment config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = {"manifold", "n", "noise", "mode", "budgets"} - set(doc)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")

    manifold_from_spec(doc["manifold"])  # validates
    mode = doc["mode"]
    if mode not in ("equal", "unequal"):
        raise ConfigError("mode must be 'equal' or 'unequal'")
    budgets = doc["budgets"]
    want = _EQUAL_BUDGET_KEYS if mode == "equal" else _UNEQUAL_BUDGET_KEYS
    if not isinstance(budgets, dict) or set(budgets) != want:
        raise ConfigError(f"budgets for mode {mode!r} must have keys {sorted(want)}")
    for key, val in budgets.items():
        if key == "steps":
            if not isinstance(val, int) or val < 1:
                raise ConfigError("budgets.steps must be a positive integer")
        elif not isinstance(val, (int, float)) or not val > 0.0:
            raise ConfigError(f"budgets.{key} must be positive")
    if mode == "unequal" and not budgets["hi"] < budgets["total"]:
        raise ConfigError("unequal mode needs hi < total so both stages stay positive")

    chain = doc.get("chain", {})
    if not isinstance(chain, dict) or set(chain) - _CHAIN_KEYS:
        raise ConfigError(f"chain keys must be a subset of {sorted(_CHAIN_KEYS)}")

    n = doc["n"]
    if not isinstance(n, int) or n < 2:
        raise ConfigError("n must be an integer of at least 2")
    noise = doc["noise"]
    if not isinstance(noise, (int, float)) or noise < 0.0:
        raise ConfigError("noise must be nonnegative")
    tau = doc.get("tau")
    if tau is not None and (not isinstance(tau, (int, float)) or not tau > 0.0):
        raise ConfigError("tau must be positive when given")
    factor = doc.get("factor", 1)
    if factor not in (1, 2):
        raise ConfigError("factor must be 1 or 2")
    m = doc.get("m", 10)
    if not isinstance(m, int) or m < 1:
        raise ConfigError("m must be a positive integer")
    replicates = doc.get("replicates", 1)
    if not isinstance(replicates, int) or replicates < 1:
        raise ConfigError("replicates must be a positive integer")

    return ExperimentConfig(
        manifold=doc["manifold"], n=n, noise=float(noise), mode=mode,
        budgets=budgets, m=m, chain=chain, tau=tau, factor=factor,
        replicates=replicates,
    )


def load_experiment_doc(path) -> dict:
    """Raw config dict from a JSON file, before schema validation."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("experiment config must be a JSON object")
    return doc


def load_experiment_config(path) -> ExperimentConfig:
    return parse_experiment_config(load_experiment_doc(path))


# --- result tables ------------------------------------------------------------------------


_GRID_COLUMNS = ["manifold", "n", "mode", "seed", "eps_p", "eps_v", "mean_mse",
                 "ln_mse", "baseline_ln_mse", "excluded", "acceptance_p",
                 "acceptance_v"]
_PLOT_COLUMNS = ["eps_p", "eps_v", "ln_mse", "baseline", "n", "seed"]


def grid_csv_text(results) -> str:
    """Full result table for one or more grid runs."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_GRID_COLUMNS)
    for res in results:
        name = res.manifold["kind"]
        for cell in res.cells:
            writer.writerow([
                name, res.n, res.mode, cell.seed,
                repr(cell.eps_p), repr(cell.eps_v), repr(cell.mean_mse),
                repr(cell.ln_mse), repr(cell.baseline_ln_mse), cell.excluded,
                repr(cell.acceptance_p), repr(cell.acceptance_v),
            ])
    return buf.getvalue()


def plot_csv_text(results) -> str:
    """Compact table with exactly the columns the summary plots consume."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_PLOT_COLUMNS)
    for res in results:
        for cell in res.cells:
            writer.writerow([
                repr(cell.eps_p), repr(cell.eps_v), repr(cell.ln_mse),
                repr(cell.baseline_ln_mse), res.n, cell.seed,
            ])
    return buf.getvalue()


def sensitivity_csv_text(report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "n", "tau", "tau_m", "delta_p_theory",
                     "delta_p_empirical", "ratio_p", "delta_v_theory",
                     "delta_v_empirical", "ratio_v"])
    for r in report.rows:
        writer.writerow([r.trial, r.n, repr(r.tau), repr(r.tau_m),
                         repr(r.delta_p_theory), repr(r.delta_p_empirical),
                         repr(r.ratio_p), repr(r.delta_v_theory),
                         repr(r.delta_v_empirical), repr(r.ratio_v)])
    return buf.getvalue()
