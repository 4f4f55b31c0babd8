"""Experiment harness: synthetic data generators, privacy-budget grids, and
the empirical validation of the sensitivity bounds.

Grid cells and replicate seeds are embarrassingly parallel; every cell derives
its chain streams from (replicate seed, cell index) alone, so results are
identical no matter how work is scheduled.  The GEODP_THREADS environment
variable caps the worker processes (default: the machine's CPU count).
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PrivacyWarning
from .geometry import Manifold, TangentVec
from .manifolds import KendallPreshape, SPD, Sphere
from .privacy import (
    SensitivitySpec,
    compose_budget,
    noise_scales,
    sensitivity_p,
    sensitivity_v,
)
from .regression import (
    Dataset,
    FitConfig,
    FitReport,
    GeodesicModel,
    _energy_rows,
    _grad_rows,
    fit,
    frechet_mean,
)
from .sampling import (
    ChainConfig,
    _footpoint_logdens,
    _resolve_eta,
    _run_chains,
    _shooting_logdens,
)

_KENDALL_SPREAD = 0.5  # geodesic length of generated shape trajectories


# --- synthetic data -------------------------------------------------------------


def _seed_rng(seed):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.default_rng(ss)


def _generate(man: Manifold, n: int, noise_std: float, seed, spread: float):
    """Sample a ground-truth geodesic, covariates, and noisy responses.

    Draw order: anchor point, unit shooting direction, covariates, noise.
    The returned model is the ground truth re-anchored at the scaled
    covariates, so x=0 maps to its footpoint exactly.
    """
    rng = _seed_rng(seed)
    anchor = man._random_point(rng)
    zeta = man._gaussian_tangent(anchor, rng.standard_normal(man.ambient_dim))
    zeta *= spread / float(man._norm(anchor, zeta))
    t = rng.uniform(0.0, 1.0, size=n)
    lo, hi = float(t.min()), float(t.max())
    x = (t - lo) / (hi - lo)
    # Effective model on the scaled covariates.
    p0 = man._exp(anchor, lo * zeta)
    v0 = (hi - lo) * man._transport(anchor, p0, zeta)
    preds = _predictions_single(man, p0, v0, x)
    if noise_std > 0.0:
        normals = rng.standard_normal((n, man.ambient_dim))
        noise = noise_std * man._gaussian_tangent(preds, normals)
        Y = man._exp(preds, noise)
    else:
        Y = preds
    point = man.point(man._project(p0))
    model = GeodesicModel(point, TangentVec(point, man._project_tangent(point.coords, v0)))
    return Dataset(x, Y, man), model


def _predictions_single(man, p, v, x):
    t = x[:, None] * v[None, :]
    return man._exp(np.broadcast_to(p, t.shape), t)


def gen_sphere(n: int, delta: float, seed) -> tuple[Dataset, GeodesicModel]:
    """Spherical regression data; delta is the tangent noise covariance."""
    return _generate(Sphere(), n, float(np.sqrt(delta)), seed, spread=1.0)


def gen_spd(n: int, sigma_noise: float, seed) -> tuple[Dataset, GeodesicModel]:
    """SPD regression data with frame-coefficient noise std sigma_noise."""
    return _generate(SPD(), n, float(sigma_noise), seed, spread=1.0)


def gen_kendall(n: int, delta: float, seed, landmarks: int = 50) -> tuple[Dataset, GeodesicModel]:
    """Shape regression data; the trajectory stays inside the pi/2 guard."""
    return _generate(KendallPreshape(landmarks), n, float(np.sqrt(delta)), seed,
                     spread=_KENDALL_SPREAD)


# --- budget grids ---------------------------------------------------------------


def equal_split_budgets(lo: float = 0.2, hi: float = 2.0, steps: int = 10):
    """Total budgets from lo to hi, split evenly between the two stages."""
    totals = np.linspace(lo, hi, steps)
    return [(float(t) / 2.0, float(t) / 2.0) for t in totals]


def unequal_split_budgets(total: float = 2.02, lo: float = 0.02, hi: float = 2.0,
                          steps: int = 10):
    """Fixed total budget traded between the stages, eps_p from lo to hi."""
    eps_p = np.linspace(lo, hi, steps)
    return [(float(e), float(total - e)) for e in eps_p]


@dataclass
class GridSpec:
    mode: str
    budget_list: list[tuple[float, float]]
    m: int = 10
    replicate_seeds: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("equal", "unequal"):
            raise ValueError("mode must be 'equal' or 'unequal'")
        if not self.budget_list:
            raise ValueError("budget_list must not be empty")
        if self.m < 1:
            raise ValueError("m must be at least 1")


@dataclass
class GridCell:
    seed: int
    eps_p: float
    eps_v: float
    mean_mse: float
    ln_mse: float
    baseline_ln_mse: float
    excluded: int
    acceptance_p: float
    acceptance_v: float


@dataclass
class GridResult:
    manifold: dict
    n: int
    mode: str
    m: int
    tau: float
    tau_policy: str
    factor: int
    chain_length: int
    burn_in: int
    baseline_ln_mse: float
    fit_converged: bool
    cells: list[GridCell]


def _run_cell(man, data, p_hat, v_hat, spec, cfg, m, seed, cell_index, eps_p, eps_v,
              factor):
    budget = compose_budget(eps_p, eps_v)
    scales = noise_scales(spec, budget, factor)
    cell_ss = np.random.SeedSequence(entropy=seed, spawn_key=(cell_index,))
    fp_ss, sh_ss = cell_ss.spawn(2)

    eta_p = _resolve_eta(man, scales.sigma_p, cfg)
    ld_p = _footpoint_logdens(man, data, p_hat, v_hat, scales.sigma_p)
    inits = np.broadcast_to(p_hat, (m, man.ambient_dim)).copy()
    points, diags_p, _ = _run_chains(man, inits, ld_p, eta_p, cfg, fp_ss.spawn(m))

    bases = np.repeat(points, m, axis=0)
    v_init = man._transport(np.broadcast_to(p_hat, bases.shape), bases,
                            np.broadcast_to(v_hat, bases.shape))
    eta_v = _resolve_eta(man, scales.sigma_v, cfg)
    ld_v = _shooting_logdens(man, data, bases, scales.sigma_v)
    vecs, diags_v, _ = _run_chains(man, v_init, ld_v, eta_v, cfg, sh_ss.spawn(m * m),
                                   linear_base=bases)

    pair_mse = 2.0 * _energy_rows(man, bases, vecs, data.x, data.y).reshape(m, m)
    fp_ok = np.array([not d.stuck for d in diags_p])
    sh_ok = np.array([not d.stuck for d in diags_v]).reshape(m, m)
    ok = fp_ok[:, None] & sh_ok
    excluded = int((~ok).sum())
    if ok.any():
        with np.errstate(invalid="ignore"):
            per_fp = np.array([pair_mse[i, ok[i]].mean() if ok[i].any() else np.nan
                               for i in range(m)])
        mean_mse = float(np.nanmean(per_fp))
    else:
        mean_mse = float("nan")
    return GridCell(
        seed=int(seed),
        eps_p=float(eps_p),
        eps_v=float(eps_v),
        mean_mse=mean_mse,
        ln_mse=float(np.log(mean_mse)) if mean_mse > 0.0 else float("nan"),
        baseline_ln_mse=0.0,  # filled by the caller
        excluded=excluded,
        acceptance_p=float(np.mean([d.acceptance_rate for d in diags_p])),
        acceptance_v=float(np.mean([d.acceptance_rate for d in diags_v])),
    )


def _run_cell_task(args):
    return args[0], _run_cell(*args[1])


def _worker_count(n_tasks: int) -> int:
    env = os.environ.get("GEODP_THREADS", "").strip()
    workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(workers, n_tasks))


def run_grid(data: Dataset, grid: GridSpec, cfg: ChainConfig, tau: float | None = None,
             factor: int = 1, fit_config: FitConfig | None = None) -> GridResult:
    """Fit once, then release private pairs over the budget grid.

    Every cell samples grid.m footpoint chains and m shooting chains per
    footpoint; the cell statistic is the mean released MSE over the m*m
    pairs, excluding stuck chains.  When tau is not given, the empirical
    residual bound of the fit is used and a privacy warning is emitted,
    because that bound is itself data-dependent.
    """
    man = data.manifold
    report = fit(data, fit_config)
    if tau is None:
        tau = report.tau_empirical
        tau_policy = "empirical"
        warnings.warn(
            "using the empirical residual bound as tau; the release is only "
            "differentially private if tau is a public constant",
            PrivacyWarning,
            stacklevel=2,
        )
    else:
        tau_policy = "public"
    kappa_l = man.curvature_bounds[0]
    tau_m = report.tau_m_empirical if kappa_l < 0.0 else 0.0
    spec = SensitivitySpec(n=data.n, tau=float(tau), kappa_l=kappa_l, tau_m=tau_m)

    baseline_ln = float(np.log(2.0 * report.energy))
    seeds = list(grid.replicate_seeds) if grid.replicate_seeds else [cfg.seed]
    p_hat = report.model.p.coords
    v_hat = report.model.v.components

    tasks = []
    for seed in seeds:
        for ci, (ep, ev) in enumerate(grid.budget_list):
            tasks.append((len(tasks), (man, data, p_hat, v_hat, spec, cfg, grid.m,
                                       seed, ci, ep, ev, factor)))

    workers = _worker_count(len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_run_cell_task, tasks))
    else:
        results = dict(map(_run_cell_task, tasks))

    cells = []
    for idx in range(len(tasks)):
        cell = results[idx]
        cell.baseline_ln_mse = baseline_ln
        cells.append(cell)

    return GridResult(
        manifold=man.spec(),
        n=data.n,
        mode=grid.mode,
        m=grid.m,
        tau=float(tau),
        tau_policy=tau_policy,
        factor=factor,
        chain_length=cfg.chain_length,
        burn_in=cfg.burn_in,
        baseline_ln_mse=baseline_ln,
        fit_converged=report.converged,
        cells=cells,
    )


# --- sensitivity validation --------------------------------------------------------


@dataclass
class AdjacentPair:
    """Datasets differing in one record, sharing the remaining n-1 records."""

    d: Dataset
    d_prime: Dataset
    union: Dataset

    def __post_init__(self):
        if self.d.n != self.d_prime.n:
            raise ValueError("adjacent datasets must have equal size")


def make_adjacent_pairs(n: int, generator, trials: int, seed) -> list[AdjacentPair]:
    """Build adjacent dataset pairs by dropping one of n+1 generated records.

    The covariate extremes are placed among the shared records, so dropping
    either end record leaves both datasets spanning [0, 1] and their shared
    n-1 records bit-identical.
    """
    if n < 3:
        raise ValueError("adjacent pairs need n of at least 3")
    root = np.random.SeedSequence(seed)
    pairs = []
    for child in root.spawn(trials):
        ds, _ = generator(n + 1, child)
        imin = int(np.argmin(ds.x))
        imax = int(np.argmax(ds.x))
        rest = [i for i in range(n + 1) if i not in (imin, imax)]
        order = np.array([rest[0], imin, imax] + rest[1:])
        x, Y = ds.x[order], ds.y[order]
        pairs.append(AdjacentPair(
            d=Dataset(x[1:], Y[1:], ds.manifold),
            d_prime=Dataset(x[:-1], Y[:-1], ds.manifold),
            union=Dataset(x, Y, ds.manifold),
        ))
    return pairs


@dataclass
class SensitivityRow:
    trial: int
    n: int
    tau: float
    tau_m: float
    delta_p_theory: float
    delta_p_empirical: float
    ratio_p: float
    delta_v_theory: float
    delta_v_empirical: float
    ratio_v: float


@dataclass
class SensitivityReport:
    rows: list[SensitivityRow]

    @property
    def min_ratio(self) -> float:
        return min(min(r.ratio_p, r.ratio_v) for r in self.rows)

    def all_bounded(self) -> bool:
        return all(r.ratio_p >= 1.0 and r.ratio_v >= 1.0 for r in self.rows)


def validate_sensitivity(pairs: list[AdjacentPair],
                         fit_config: FitConfig | None = None) -> SensitivityReport:
    """Compare theoretical sensitivities against realized gradient swings.

    For each adjacent pair the model is fitted on the union dataset, tau and
    tau_m are measured there, and the gradient difference between the two
    datasets is evaluated at that common model.  Ratios of at least 1 mean
    the theoretical bound dominates the observed change.
    """
    rows = []
    for trial, pair in enumerate(pairs):
        man = pair.union.manifold
        report = fit(pair.union, fit_config)
        p = report.model.p.coords
        v = report.model.v.components
        tau = report.tau_empirical
        kappa_l = man.curvature_bounds[0]
        tau_m = report.tau_m_empirical if kappa_l < 0.0 else 0.0
        spec = SensitivitySpec(n=pair.d.n, tau=tau, kappa_l=kappa_l, tau_m=tau_m)

        diffs = {}
        for wrt in ("p", "v"):
            g_d, _ = _grad_rows(man, p[None], v[None], pair.d.x, pair.d.y, wrt)
            g_dp, _ = _grad_rows(man, p[None], v[None], pair.d_prime.x, pair.d_prime.y, wrt)
            diffs[wrt] = float(man._norm(p, g_d[0] - g_dp[0]))

        thy_p = sensitivity_p(spec)
        thy_v = sensitivity_v(spec)
        rows.append(SensitivityRow(
            trial=trial,
            n=pair.d.n,
            tau=tau,
            tau_m=tau_m,
            delta_p_theory=thy_p,
            delta_p_empirical=diffs["p"],
            ratio_p=thy_p / diffs["p"] if diffs["p"] > 0.0 else float("inf"),
            delta_v_theory=thy_v,
            delta_v_empirical=diffs["v"],
            ratio_v=thy_v / diffs["v"] if diffs["v"] > 0.0 else float("inf"),
        ))
    return SensitivityReport(rows)
