"""Riemannian random-walk Metropolis sampling of the private release densities.

Proposals are drawn uniformly from a metric ball of radius eta in the tangent
space at the current state and mapped through the exponential (footpoint
stage) or added directly (shooting stage).  The walk targets the gradient-norm
log-density from the privacy module; the released value is the final chain
state, so a release consumes its whole chain.

The engines run many chains in lockstep as one batched numpy computation, but
every chain consumes randomness only from its own seeded stream, in a fixed
block order.  A chain therefore produces bit-identical output whether it runs
alone or inside a batch.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CutLocusError
from .geometry import Manifold, ManifoldPoint, TangentVec
from .privacy import NoiseScales, PrivacyBudget, SensitivitySpec, noise_scales
from .regression import Dataset, FitReport, GeodesicModel, _grad_rows

_BLOCK = 512
_ETA_CAP_FRACTION = 0.1
_TINY = 1e-300


@dataclass
class ChainConfig:
    """Metropolis chain parameters; seed is the master seed of the release."""

    seed: int
    chain_length: int = 5000
    burn_in: int = 1000
    proposal_radius: float | None = None
    eta_factor: float = 1.0

    def __post_init__(self):
        if self.chain_length < 1:
            raise ValueError("chain_length must be at least 1")
        if not 0 <= self.burn_in < self.chain_length:
            raise ValueError("burn_in must lie in [0, chain_length)")
        if self.proposal_radius is not None and not self.proposal_radius > 0.0:
            raise ValueError("proposal_radius must be positive")
        if not self.eta_factor > 0.0:
            raise ValueError("eta_factor must be positive")


@dataclass
class ChainDiagnostics:
    acceptance_rate: float
    accepted: int
    proposals: int
    final_logdensity: float
    samples_kept: int
    eta: float
    stuck: bool
    healthy: bool


def _resolve_eta(man: Manifold, sigma: float, cfg: ChainConfig) -> float:
    eta = cfg.proposal_radius if cfg.proposal_radius is not None else cfg.eta_factor * sigma
    if np.isfinite(man.injectivity_radius):
        eta = min(eta, _ETA_CAP_FRACTION * man.injectivity_radius)
    if not eta > 0.0:
        raise ValueError("proposal radius collapsed to zero")
    return float(eta)


def propose(current: ManifoldPoint, eta: float, rng: np.random.Generator) -> ManifoldPoint:
    """One uniform-ball random-walk proposal from the current point."""
    man = current.manifold
    direction = man._gaussian_tangent(current.coords, rng.standard_normal(man.ambient_dim))
    nd = float(man._norm(current.coords, direction))
    direction = direction / max(nd, _TINY)
    radius = eta * float(rng.random()) ** (1.0 / man.dim)
    return ManifoldPoint(man, man._exp(current.coords, radius * direction))


def _diagnostics(accepted, steps, final_ld, cfg, eta):
    rate = accepted / steps
    return ChainDiagnostics(
        acceptance_rate=float(rate),
        accepted=int(accepted),
        proposals=int(steps),
        final_logdensity=float(final_ld),
        samples_kept=int(cfg.chain_length - cfg.burn_in),
        eta=float(eta),
        stuck=bool(accepted == 0),
        healthy=bool(0.1 < rate < 0.9),
    )


def _run_chains(man, state, logdens, eta, cfg, seed_seqs, linear_base=None,
                keep_samples=False):
    """Lockstep Metropolis walk for a batch of chains.

    state is (B, ambient).  With linear_base=None the walk moves on the
    manifold through the exponential map; otherwise state rows are tangent
    components at the fixed base rows and proposals are straight increments.
    """
    B, amb = state.shape
    gens = [np.random.Generator(np.random.PCG64(ss)) for ss in seed_seqs]
    cur = np.array(state, dtype=float)
    cur_ld = logdens(cur)
    accepted = np.zeros(B, dtype=np.int64)
    inv_dim = 1.0 / man.dim
    kept = [] if keep_samples else None

    done = 0
    while done < cfg.chain_length:
        mb = min(_BLOCK, cfg.chain_length - done)
        normals = np.stack([g.standard_normal((mb, amb)) for g in gens])
        radii = np.stack([g.random(mb) for g in gens])
        log_u = np.log(np.stack([g.random(mb) for g in gens]))
        for j in range(mb):
            anchors = cur if linear_base is None else linear_base
            dirs = man._gaussian_tangent(anchors, normals[:, j])
            nd = man._norm(anchors, dirs)[:, None]
            dirs = dirs / np.maximum(nd, _TINY)
            step = (eta * radii[:, j] ** inv_dim)[:, None] * dirs
            if linear_base is None:
                prop = man._exp(cur, step)
            else:
                prop = man._project_tangent(linear_base, cur + step)
            ld = logdens(prop)
            # -inf proposals are never accepted; a (-inf) - (-inf) delta is
            # nan and the comparison is False, which is the right outcome.
            with np.errstate(invalid="ignore"):
                accept = log_u[:, j] < (ld - cur_ld)
            cur = np.where(accept[:, None], prop, cur)
            cur_ld = np.where(accept, ld, cur_ld)
            accepted += accept
            if keep_samples and done + j >= cfg.burn_in:
                kept.append(cur.copy())
        done += mb

    diags = [_diagnostics(accepted[b], cfg.chain_length, cur_ld[b], cfg, eta)
             for b in range(B)]
    samples = np.stack(kept, axis=1) if keep_samples else None
    return cur, diags, samples


# --- stage densities -----------------------------------------------------------


def _footpoint_logdens(man, data, p_hat, v_hat, sigma):
    guard = man.cut_locus_radius

    def ld(points):
        base = np.broadcast_to(p_hat, points.shape)
        reachable = man._dist(base, points) < guard
        moved = man._transport(base, points, np.broadcast_to(v_hat, points.shape))
        g, valid = _grad_rows(man, points, moved, data.x, data.y, "p")
        out = -man._norm(points, g) / sigma
        return np.where(valid & reachable, out, -np.inf)

    return ld


def _shooting_logdens(man, data, bases, sigma):
    def ld(vs):
        g, valid = _grad_rows(man, bases, vs, data.x, data.y, "v")
        out = -man._norm(bases, g) / sigma
        return np.where(valid, out, -np.inf)

    return ld


# --- public single-chain API ------------------------------------------------------


def sample_footpoint(data: Dataset, fit_report: FitReport, scales: NoiseScales,
                     cfg: ChainConfig, seed_seq=None, keep_samples=False):
    """Run one footpoint chain started at the fitted footpoint.

    Returns (point, diagnostics) or (point, diagnostics, samples) when
    keep_samples is set.
    """
    man = data.manifold
    model = fit_report.model
    eta = _resolve_eta(man, scales.sigma_p, cfg)
    ss = seed_seq if seed_seq is not None else np.random.SeedSequence(cfg.seed)
    logdens = _footpoint_logdens(man, data, model.p.coords, model.v.components,
                                 scales.sigma_p)
    finals, diags, samples = _run_chains(
        man, model.p.coords[None], logdens, eta, cfg, [ss], keep_samples=keep_samples)
    point = ManifoldPoint(man, man._project(finals[0]))
    if keep_samples:
        return point, diags[0], samples[0]
    return point, diags[0]


def sample_shooting(p_tilde: ManifoldPoint, data: Dataset, fit_report: FitReport,
                    scales: NoiseScales, cfg: ChainConfig, seed_seq=None,
                    keep_samples=False):
    """Run one shooting-vector chain at a fixed private footpoint.

    The chain starts from the fitted shooting vector parallel-transported
    from the fitted footpoint directly to p_tilde.
    """
    man = data.manifold
    model = fit_report.model
    if float(man._dist(model.p.coords, p_tilde.coords)) >= man.cut_locus_radius:
        raise CutLocusError("private footpoint is beyond the fit's cut-locus guard")
    eta = _resolve_eta(man, scales.sigma_v, cfg)
    ss = seed_seq if seed_seq is not None else np.random.SeedSequence(cfg.seed)
    init = man._transport(model.p.coords, p_tilde.coords, model.v.components)
    base = p_tilde.coords[None]
    logdens = _shooting_logdens(man, data, base, scales.sigma_v)
    finals, diags, samples = _run_chains(
        man, init[None], logdens, eta, cfg, [ss], linear_base=base,
        keep_samples=keep_samples)
    vec = TangentVec(p_tilde, man._project_tangent(p_tilde.coords, finals[0]))
    if keep_samples:
        return vec, diags[0], samples[0]
    return vec, diags[0]


@dataclass
class PrivateRelease:
    """A privately released geodesic model with full provenance."""

    model: GeodesicModel
    budget: PrivacyBudget
    scales: NoiseScales
    spec: SensitivitySpec
    chain_config: ChainConfig
    diagnostics_p: ChainDiagnostics
    diagnostics_v: ChainDiagnostics
    seed: int


def release_pair(data: Dataset, fit_report: FitReport, spec: SensitivitySpec,
                 budget: PrivacyBudget, cfg: ChainConfig, factor: int = 1) -> PrivateRelease:
    """Release a private (footpoint, shooting vector) pair.

    The two stages compose sequentially: the footpoint chain spends
    budget.eps_p, the shooting chain spends budget.eps_v conditioned on the
    released footpoint.  Each stage gets an independent substream of the
    master seed.
    """
    scales = noise_scales(spec, budget, factor)
    ss_p, ss_v = np.random.SeedSequence(cfg.seed).spawn(2)
    p_tilde, diag_p = sample_footpoint(data, fit_report, scales, cfg, seed_seq=ss_p)
    v_tilde, diag_v = sample_shooting(p_tilde, data, fit_report, scales, cfg,
                                      seed_seq=ss_v)
    if not (diag_p.healthy and diag_v.healthy):
        warnings.warn(
            f"chain acceptance rates ({diag_p.acceptance_rate:.3f}, "
            f"{diag_v.acceptance_rate:.3f}) fall outside (0.1, 0.9)",
            UserWarning,
            stacklevel=2,
        )
    return PrivateRelease(
        model=GeodesicModel(p_tilde, v_tilde),
        budget=budget,
        scales=scales,
        spec=spec,
        chain_config=cfg,
        diagnostics_p=diag_p,
        diagnostics_v=diag_v,
        seed=cfg.seed,
    )
