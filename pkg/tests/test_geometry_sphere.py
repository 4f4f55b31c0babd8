"""Sphere geometry kernels and the typed wrapper layer."""

import numpy as np
import pytest

from geodp import (
    BaseMismatch,
    CutLocusError,
    DomainError,
    InvalidTangent,
    ManifoldMismatch,
)
from geodp.manifolds import SPD, Sphere

RNG = np.random.default_rng(8821)
MAN = Sphere()


def random_state(rng, scale=0.8):
    p = MAN._random_point(rng)
    v = MAN._gaussian_tangent(p, rng.standard_normal(3))
    norm = float(MAN._norm(p, v))
    v = v / norm * rng.uniform(0.0, scale * MAN.injectivity_radius)
    return p, v


def test_roundtrip_and_speed():
    rng = np.random.default_rng(1)
    for _ in range(300):
        p, v = random_state(rng)
        q = MAN._exp(p, v)
        back = MAN._log(p, q)
        nv = float(MAN._norm(p, v))
        assert np.linalg.norm(back - v) <= 1e-8 * max(1.0, nv)
        assert MAN._dist(p, q) == pytest.approx(nv, abs=1e-8)
        for t in np.linspace(0.1, 1.0, 10):
            assert MAN._dist(p, MAN._exp(p, t * v)) == pytest.approx(t * nv, abs=1e-8)


def test_dist_matches_atan2_form():
    # arccos form of the implementation vs the numerically independent atan2 form
    rng = np.random.default_rng(2)
    for _ in range(200):
        x, y = MAN._random_point(rng), MAN._random_point(rng)
        expect = np.arctan2(np.linalg.norm(np.cross(x, y)), np.dot(x, y))
        assert MAN._dist(x, y) == pytest.approx(expect, abs=1e-12)


def test_transport_matches_rotation_matrix():
    # transport along the great circle equals the rotation about x cross y
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = MAN._random_point(rng)
        y = MAN._random_point(rng)
        if MAN._dist(x, y) >= MAN.cut_locus_radius - 1e-3:
            continue
        u = MAN._gaussian_tangent(x, rng.standard_normal(3))
        axis = np.cross(x, y)
        na = np.linalg.norm(axis)
        if na < 1e-12:
            continue
        k = axis / na
        ang = MAN._dist(x, y)
        rotated = (u * np.cos(ang) + np.cross(k, u) * np.sin(ang)
                   + k * np.dot(k, u) * (1 - np.cos(ang)))
        got = MAN._transport(x, y, u)
        assert np.linalg.norm(got - rotated) <= 1e-10 * max(1.0, np.linalg.norm(u))


def test_transport_isometry_and_own_velocity():
    rng = np.random.default_rng(4)
    for _ in range(200):
        p, v = random_state(rng)
        q = MAN._exp(p, v)
        u = MAN._gaussian_tangent(p, rng.standard_normal(3))
        w = MAN._gaussian_tangent(p, rng.standard_normal(3))
        gu, gw = MAN._transport(p, q, u), MAN._transport(p, q, w)
        assert MAN._inner(q, gu, gw) == pytest.approx(MAN._inner(p, u, w), abs=1e-8)
        # the geodesic's own velocity arrives as minus the return direction
        moved = MAN._transport(p, q, v)
        assert np.linalg.norm(moved + MAN._log(q, p)) <= 1e-9 * max(1.0, float(MAN._norm(p, v)))


def test_membership_and_tangency_maintained():
    rng = np.random.default_rng(5)
    for _ in range(300):
        p, v = random_state(rng)
        q = MAN._exp(p, v)
        assert MAN._point_defect(q) <= 1e-10
        moved = MAN._transport(p, q, v)
        assert MAN._tangent_defect(q, moved) <= 1e-10


def test_frame_orthonormal_and_reconstructs():
    rng = np.random.default_rng(6)
    for _ in range(100):
        p = MAN._random_point(rng)
        frame = MAN._frame(p)
        assert frame.shape == (2, 3)
        gram = frame @ frame.T
        assert np.abs(gram - np.eye(2)).max() <= 1e-10
        assert np.abs(frame @ p).max() <= 1e-10
        u = MAN._gaussian_tangent(p, rng.standard_normal(3))
        coeff = frame @ u
        assert np.linalg.norm(coeff @ frame - u) <= 1e-10


def test_exp_log_dist_closed_form_spot_values():
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 0.0])
    assert MAN._dist(x, y) == pytest.approx(np.pi / 2, abs=1e-15)
    v = MAN._log(x, y)
    assert np.allclose(v, [0.0, np.pi / 2, 0.0], atol=1e-15)
    q = MAN._exp(x, np.array([0.0, np.pi, 0.0]) / 2)
    assert np.allclose(q, y, atol=1e-15)


def test_adjoint_kernels_match_map_differentials():
    """The pullback kernels agree with finite differences of the actual maps."""
    rng = np.random.default_rng(7)
    h = 1e-6
    for _ in range(50):
        p, v = random_state(rng, scale=0.5)
        nv = float(MAN._norm(p, v))
        if nv < 1e-3:
            continue
        vhat = v / nv
        w = MAN._gaussian_tangent(MAN._exp(p, v), rng.standard_normal(3))
        for which in ("p", "v"):
            frame = MAN._frame(p)
            fd = np.zeros(2)
            for j, b in enumerate(frame):
                if which == "p":
                    pp, pm = MAN._exp(p, h * b), MAN._exp(p, -h * b)
                    qp = MAN._exp(pp, MAN._transport(p, pp, v))
                    qm = MAN._exp(pm, MAN._transport(p, pm, v))
                else:
                    qp = MAN._exp(p, v + h * b)
                    qm = MAN._exp(p, v - h * b)
                fd[j] = np.dot(w, (qp - qm) / (2 * h))
            adj = (MAN._adjoint_dexp_p if which == "p" else MAN._adjoint_dexp_v)(
                p, vhat, np.array(nv), MAN._transport(MAN._exp(p, v), p, w))
            got = frame @ adj
            assert np.linalg.norm(got - fd) <= 5e-5 * max(1.0, np.linalg.norm(fd))


def test_wrapper_validation_errors():
    p = MAN.point([1.0, 0.0, 0.0])
    q = MAN.point([0.0, 1.0, 0.0])
    with pytest.raises(ValueError, match="membership"):
        MAN.point([1.0, 1.0, 0.0])
    with pytest.raises(ValueError, match="tangency"):
        MAN.tangent(p, [1.0, 0.0, 0.0])
    # project_to_tangent cleans raw components instead of rejecting them
    assert np.allclose(MAN.project_to_tangent(p, [1.0, 0.5, 0.0]).components,
                       [0.0, 0.5, 0.0])
    with pytest.raises(InvalidTangent):
        MAN.exp_map(q, MAN.tangent(p, [0.0, 0.0, 0.1]))
    with pytest.raises(DomainError):
        MAN.exp_map(p, MAN.tangent(p, [0.0, np.pi, 0.0]))  # at the guard
    with pytest.raises(CutLocusError):
        MAN.log_map(p, MAN.point([-1.0, 0.0, 0.0]))
    with pytest.raises(CutLocusError):
        MAN.parallel_transport(MAN.tangent(p, [0.0, 0.1, 0.0]),
                               MAN.point([-1.0, 0.0, 0.0]))
    with pytest.raises(BaseMismatch):
        MAN.inner(MAN.tangent(p, [0.0, 0.1, 0.0]), MAN.tangent(q, [0.1, 0.0, 0.0]))
    with pytest.raises(ManifoldMismatch):
        MAN.dist(p, SPD().point([1.0, 0.0, 0.0, 1.0]))


def test_point_equality_semantics():
    p = MAN.point([1.0, 0.0, 0.0])
    same = MAN.point([1.0, 0.0, 0.0])
    other = MAN.point([0.0, 1.0, 0.0])
    assert p == same
    assert p != other
    assert MAN.tangent(p, [0.0, 0.2, 0.0]) == MAN.tangent(same, [0.0, 0.2, 0.0])


def test_projection_normalizes():
    raw = np.array([3.0, 4.0, 0.0])
    p = MAN.project_to_manifold(raw)
    assert np.allclose(p.coords, [0.6, 0.8, 0.0], atol=1e-15)


def test_zero_tangent_and_exp_identity():
    p = MAN.point([0.0, 0.0, 1.0])
    q = MAN.exp_map(p, MAN.zero_tangent(p))
    assert MAN.dist(p, q) <= 1e-15
