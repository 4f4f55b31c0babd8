"""Geodesic regression: energy, gradients, and the alternating fitter."""

import math

import numpy as np
import pytest

from geodp.errors import DegenerateCovariates
from geodp.manifolds import SPD, KendallPreshape, Sphere
from geodp.regression import (
    Dataset,
    FitConfig,
    GeodesicModel,
    energy,
    fit,
    frechet_mean,
    grad_p,
    grad_v,
    mse,
    residuals,
    scale_covariates,
)

MANIFOLDS = [Sphere(), SPD(), KendallPreshape(5)]
IDS = [m.kind for m in MANIFOLDS]


def make_dataset(man, n, noise, seed, spread=0.6):
    rng = np.random.default_rng(seed)
    p0 = man.random_point(rng)
    v0 = man.random_tangent(p0, rng)
    v0 = man.tangent(p0, v0.components / man.norm(v0) * spread * min(man.injectivity_radius, 2.0))
    x = np.linspace(0.0, 1.0, n)
    model = GeodesicModel(p0, v0)
    Y = model.predict(x)
    if noise > 0.0:
        pts = []
        for row in Y:
            q = man.point(row)
            pts.append(man.exp_map(q, man.random_tangent(q, rng, scale=noise)).coords)
        Y = np.stack(pts)
    return Dataset(x, Y, man), model


def test_two_point_energy_value():
    man = Sphere()
    p = man.point([1.0, 0.0, 0.0])
    model = GeodesicModel(p, man.zero_tangent(p))
    data = Dataset([0.0, 1.0], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], man)
    # both predictions sit at p, so only the quarter-circle residual counts
    assert energy(model, data) == pytest.approx(math.pi**2 / 16, rel=1e-14)
    assert mse(model, data) == pytest.approx(math.pi**2 / 8, rel=1e-14)


@pytest.mark.parametrize("man", MANIFOLDS, ids=IDS)
def test_mse_is_exactly_twice_energy(man):
    data, model = make_dataset(man, 12, 0.05, seed=101)
    assert mse(model, data) == 2.0 * energy(model, data)


@pytest.mark.parametrize("man", MANIFOLDS, ids=IDS)
def test_energy_matches_residual_norms(man):
    data, model = make_dataset(man, 15, 0.08, seed=102)
    res = residuals(model, data)
    total = sum(man.norm(r) ** 2 for r in res)
    assert energy(model, data) == pytest.approx(total / (2 * data.n), rel=1e-12)


def test_single_record_energy_formula():
    man = Sphere()
    rng = np.random.default_rng(103)
    p = man.random_point(rng)
    v = man.random_tangent(p, rng, scale=0.4)
    y = man.random_point(rng)
    data = Dataset(np.array([1.0]), y.coords[None, :], man, validate=False)
    model = GeodesicModel(p, v)
    pred = man.exp_map(p, v)
    assert energy(model, data) == pytest.approx(0.5 * man.dist(pred, y) ** 2, rel=1e-13)


@pytest.mark.parametrize("man", MANIFOLDS, ids=IDS)
def test_gradients_match_finite_differences(man):
    """Independent central differences through the public energy function."""
    h = 1e-5
    for seed in (104, 105, 106):
        data, model = make_dataset(man, 8, 0.1, seed=seed, spread=0.4)
        p, v = model.p, model.v
        gp = grad_p(model, data)
        gv = grad_v(model, data)
        basis = man.tangent_basis(p)
        fd_p = np.zeros(len(basis))
        fd_v = np.zeros(len(basis))
        for j, b in enumerate(basis):
            step = man.tangent(p, h * b.components)
            pp = man.exp_map(p, step)
            pm = man.exp_map(p, man.tangent(p, -h * b.components))
            fd_p[j] = (
                energy(GeodesicModel(pp, man.parallel_transport(v, pp)), data)
                - energy(GeodesicModel(pm, man.parallel_transport(v, pm)), data)
            ) / (2 * h)
            vp = man.project_to_tangent(p, v.components + h * b.components)
            vm = man.project_to_tangent(p, v.components - h * b.components)
            fd_v[j] = (
                energy(GeodesicModel(p, vp), data) - energy(GeodesicModel(p, vm), data)
            ) / (2 * h)
        got_p = np.array([man.inner(gp, b) for b in basis])
        got_v = np.array([man.inner(gv, b) for b in basis])
        assert np.linalg.norm(got_p - fd_p) <= 1e-4 * max(1.0, np.linalg.norm(fd_p))
        assert np.linalg.norm(got_v - fd_v) <= 1e-4 * max(1.0, np.linalg.norm(fd_v))


def test_spd_gradient_flat_limit():
    """For data in a tiny ball the footpoint gradient degenerates to the
    Euclidean least-squares form: minus the mean back-transported residual."""
    man = SPD()
    rng = np.random.default_rng(107)
    p0 = man.point(np.eye(2).reshape(-1))
    v0 = man.random_tangent(p0, rng, scale=0.01)
    x = np.linspace(0.0, 1.0, 10)
    model = GeodesicModel(p0, v0)
    pts = []
    for row in model.predict(x):
        q = man.point(row)
        pts.append(man.exp_map(q, man.random_tangent(q, rng, scale=0.005)).coords)
    data = Dataset(x, np.stack(pts), man)
    gp = grad_p(model, data)
    back = np.stack([
        man.parallel_transport(r, p0).components for r in residuals(model, data)
    ])
    expected = -back.mean(axis=0)
    assert np.linalg.norm(gp.components - expected) <= 1e-3 * np.linalg.norm(expected)


@pytest.mark.parametrize("man", MANIFOLDS, ids=IDS)
def test_fit_recovers_noiseless_geodesic(man):
    data, truth = make_dataset(man, 20, 0.0, seed=108)
    report = fit(data)
    assert report.converged
    assert report.energy <= 1e-12
    assert man.dist(report.model.p, truth.p) <= 1e-6
    assert np.linalg.norm(report.model.v.components - truth.v.components) <= 1e-6
    assert max(report.gradient_norms) <= 1e-6


def test_fit_energy_never_increases():
    data, _ = make_dataset(Sphere(), 30, 0.15, seed=109)
    report = fit(data, FitConfig(track_energy=True))
    trace = np.asarray(report.energy_trace)
    assert trace.size >= 2
    assert np.all(np.diff(trace) <= 1e-15)
    assert report.energy == pytest.approx(trace[-1], rel=1e-15)


def test_fit_report_consistency():
    data, _ = make_dataset(Sphere(), 25, 0.05, seed=110)
    report = fit(data, FitConfig(tol=1e-8))
    assert report.converged
    assert max(report.gradient_norms) <= 1e-8
    assert report.energy == pytest.approx(energy(report.model, data), rel=1e-12)
    man = data.manifold
    preds = report.model.predict(data.x)
    dists = [man.dist(man.point(a), man.point(b)) for a, b in zip(preds, data.y)]
    assert report.tau_empirical == pytest.approx(max(dists), rel=1e-12)
    assert report.tau_m_empirical >= 0.0


def test_fit_reversed_covariates_traces_same_curve():
    man = Sphere()
    data, _ = make_dataset(man, 30, 0.01, seed=111)
    rev = Dataset(1.0 - data.x, data.y, man)
    cfg = FitConfig(tol=1e-10)
    fwd = fit(data, cfg).model
    bwd = fit(rev, cfg).model
    pf = fwd.predict(data.x)
    pb = bwd.predict(1.0 - data.x)
    assert float(np.max(man._dist(pf, pb))) <= 1e-6


def test_dataset_validation():
    man = Sphere()
    good = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    with pytest.raises(ValueError, match="at least two"):
        Dataset([0.5], good[:1], man)
    with pytest.raises(ValueError, match="shape"):
        Dataset([0.0, 1.0], np.ones((2, 4)), man)
    with pytest.raises(ValueError, match="span"):
        Dataset([0.2, 0.9], good, man)
    with pytest.raises(ValueError, match="membership"):
        Dataset([0.0, 1.0], 2.0 * good, man)
    with pytest.raises(ValueError, match="finite"):
        Dataset([0.0, np.nan], good, man)
    data = Dataset([0.0, 1.0], good, man)
    assert data.n == 2
    assert [p.coords.tolist() for p in data.points()] == good.tolist()


def test_model_requires_matching_base():
    man = Sphere()
    rng = np.random.default_rng(112)
    p, q = man.random_point(rng), man.random_point(rng)
    with pytest.raises(ValueError, match="footpoint"):
        GeodesicModel(p, man.zero_tangent(q))


def test_scale_covariates():
    assert scale_covariates([2.0, 4.0, 6.0]).tolist() == [0.0, 0.5, 1.0]
    out = scale_covariates([-1.0, 0.0, 3.0])
    assert out.min() == 0.0 and out.max() == 1.0
    with pytest.raises(DegenerateCovariates):
        scale_covariates([3.0, 3.0, 3.0])
    with pytest.raises(DegenerateCovariates):
        scale_covariates([0.0, np.inf])
    with pytest.raises(ValueError):
        scale_covariates([[0.0, 1.0]])


def test_frechet_mean_sphere_midpoint():
    man = Sphere()
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([0.0, 1.0, 0.0])
    m = frechet_mean(man, np.stack([a, b]))
    mid = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    assert np.linalg.norm(m - mid) <= 1e-8


def test_frechet_mean_spd_geometric():
    # commuting matrices reduce the Karcher mean to the geometric mean
    man = SPD()
    a = np.diag([1.0, 4.0]).reshape(-1)
    b = np.diag([4.0, 1.0]).reshape(-1)
    m = frechet_mean(man, np.stack([a, b]))
    assert np.linalg.norm(m - np.diag([2.0, 2.0]).reshape(-1)) <= 1e-8
