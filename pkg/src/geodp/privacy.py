"""Sensitivity bounds, budget composition, and the exponential-family
log-density targeted by the private samplers.

The mechanism releases a value z with density proportional to
exp(-||grad E(z; D)||_z / sigma).  The noise scale sigma = factor * Delta / eps
uses the curvature-dependent gradient sensitivity Delta; factor 2 is the
conservative variant for the case where the normalizing constant varies with
the footpoint.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BaseMismatch, CutLocusError, NonpositiveBudget
from .geometry import ManifoldPoint, TangentVec
from .regression import Dataset, _grad_rows

_FLAT_TOL = 1e-12


@dataclass(frozen=True)
class SensitivitySpec:
    """Inputs to the gradient-sensitivity bounds.

    n: number of records; tau: bound on residual norms; tau_m: bound on the
    data radius about its mean (only used under negative curvature);
    kappa_l: lower sectional curvature bound of the manifold.
    """

    n: int
    tau: float
    kappa_l: float
    tau_m: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.tau < 0.0 or self.tau_m < 0.0:
            raise ValueError("tau and tau_m must be nonnegative")
        if not np.isfinite(self.tau) or not np.isfinite(self.tau_m):
            raise ValueError("tau and tau_m must be finite")


@dataclass(frozen=True)
class PrivacyBudget:
    eps_p: float
    eps_v: float

    @property
    def total(self) -> float:
        return self.eps_p + self.eps_v


@dataclass(frozen=True)
class NoiseScales:
    sigma_p: float
    sigma_v: float
    factor: int


def sensitivity_p(spec: SensitivitySpec) -> float:
    """Worst-case change of the footpoint gradient under one record swap."""
    base = 2.0 * spec.tau / spec.n
    if spec.kappa_l >= -_FLAT_TOL:
        return base
    a = np.sqrt(-spec.kappa_l)
    return base * float(np.cosh(2.0 * a * (spec.tau_m + spec.tau)))


def sensitivity_v(spec: SensitivitySpec) -> float:
    """Worst-case change of the shooting-vector gradient under one record swap."""
    if spec.kappa_l >= -_FLAT_TOL:
        return 2.0 * spec.tau / spec.n
    a = np.sqrt(-spec.kappa_l)
    s = spec.tau_m + spec.tau
    x = a * s
    if x < 1e-8:
        ratio = 2.0 + (4.0 / 3.0) * x * x
    else:
        ratio = float(np.sinh(2.0 * x)) / x
    return (spec.tau / spec.n) * ratio


def compose_budget(eps_p: float, eps_v: float) -> PrivacyBudget:
    """Sequential composition of the two release stages."""
    for name, eps in (("eps_p", eps_p), ("eps_v", eps_v)):
        if not np.isfinite(eps) or eps <= 0.0:
            raise NonpositiveBudget(f"{name} must be strictly positive, got {eps!r}")
    return PrivacyBudget(float(eps_p), float(eps_v))


def noise_scales(spec: SensitivitySpec, budget: PrivacyBudget, factor: int = 1) -> NoiseScales:
    """Per-stage noise scales sigma = factor * Delta / eps."""
    if factor not in (1, 2):
        raise ValueError("factor must be 1 or 2")
    if budget.eps_p <= 0.0 or budget.eps_v <= 0.0:
        raise NonpositiveBudget("budget stages must be strictly positive")
    return NoiseScales(
        sigma_p=factor * sensitivity_p(spec) / budget.eps_p,
        sigma_v=factor * sensitivity_v(spec) / budget.eps_v,
        factor=factor,
    )


# --- log-densities ----------------------------------------------------------------
# Both densities are known only up to their normalizing constant, which is all
# the Metropolis samplers need.


def kng_logdensity_p(p: ManifoldPoint, v_ref: TangentVec, data: Dataset,
                     sigma_p: float) -> float:
    """Footpoint log-density at p, with the reference shooting vector
    parallel-transported from its own base to p."""
    man = data.manifold
    moved = man.parallel_transport(v_ref, p)
    g, valid = _grad_rows(man, p.coords[None], moved.components[None],
                          data.x, data.y, "p")
    if not valid[0]:
        raise CutLocusError("gradient undefined: a prediction reaches a cut locus")
    return -float(man._norm(p.coords, g[0])) / sigma_p


def kng_logdensity_v(v: TangentVec, p_fixed: ManifoldPoint, data: Dataset,
                     sigma_v: float) -> float:
    """Shooting-vector log-density at v for a fixed footpoint."""
    if not (v.base == p_fixed):
        raise BaseMismatch("v must be based at p_fixed")
    man = data.manifold
    g, valid = _grad_rows(man, p_fixed.coords[None], v.components[None],
                          data.x, data.y, "v")
    if not valid[0]:
        raise CutLocusError("gradient undefined: a prediction reaches a cut locus")
    return -float(man._norm(p_fixed.coords, g[0])) / sigma_v
