"""Kendall shape space for k planar landmarks, worked in preshape coordinates.

A preshape is a centered, unit-norm configuration of k complex landmarks.
Points are stored as interleaved real coordinates (re0, im0, re1, im1, ...).
All operations act modulo rotation: distances use the phase-aligned
representative, tangent vectors are horizontal (orthogonal to the base and to
the vertical rotation direction i*base), and transports re-phase their output
to the caller's representative.  This realizes the shape manifold without ever
leaving preshape coordinates.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateInput
from ..geometry import Manifold

_TINY = 1e-14


def _as_complex(x):
    return np.ascontiguousarray(x).view(np.complex128)


def _as_real(z):
    return np.ascontiguousarray(z).view(np.float64)


def _herm(z, w):
    """Hermitian inner product sum(conj(z) * w) over the landmark axis."""
    return np.einsum("...i,...i->...", np.conj(z), w)


class KendallPreshape(Manifold):
    """Shape space of k >= 4 planar landmarks; curvature in [1, 4]."""

    kind = "kendall"

    def __init__(self, landmarks: int):
        if landmarks < 4:
            raise ValueError("kendall shape space requires at least 4 landmarks")
        self.landmarks = int(landmarks)

    @property
    def dim(self) -> int:
        return 2 * self.landmarks - 4

    @property
    def ambient_dim(self) -> int:
        return 2 * self.landmarks

    @property
    def curvature_bounds(self) -> tuple[float, float]:
        return (1.0, 4.0)

    @property
    def injectivity_radius(self) -> float:
        return np.pi / 2

    @property
    def cut_locus_radius(self) -> float:
        return np.pi / 2 - 1e-6

    @property
    def closed_form_gradients(self) -> bool:
        return True

    def spec(self) -> dict:
        return {"kind": self.kind, "landmarks": self.landmarks}

    def __repr__(self):
        return f"KendallPreshape({self.landmarks})"

    def __eq__(self, other):
        return isinstance(other, KendallPreshape) and other.landmarks == self.landmarks

    def __hash__(self):
        return hash((self.kind, self.landmarks))

    # --- kernels -----------------------------------------------------------

    def _point_defect(self, x):
        z = _as_complex(x)
        centroid = np.abs(np.sum(z, axis=-1))
        unit = np.abs(np.linalg.norm(z, axis=-1) - 1.0)
        return np.maximum(centroid, unit)

    def _project(self, raw):
        z = _as_complex(raw)
        z = z - np.mean(z, axis=-1, keepdims=True)
        n = np.linalg.norm(z, axis=-1, keepdims=True)
        if np.any(n < 1e-12):
            raise DegenerateInput("landmarks coincide; no shape after centering")
        return _as_real(z / n)

    def _tangent_defect(self, x, u):
        z = _as_complex(x)
        w = _as_complex(u)
        centroid = np.abs(np.sum(w, axis=-1))
        return np.maximum(centroid, np.abs(_herm(z, w)))

    def _project_tangent(self, x, u):
        z = _as_complex(x)
        w = _as_complex(u)
        w = w - np.mean(w, axis=-1, keepdims=True)
        w = w - _herm(z, w)[..., None] * z
        return _as_real(w)

    def _exp(self, x, u):
        z = _as_complex(x)
        w = _as_complex(u)
        theta = np.linalg.norm(w, axis=-1, keepdims=True)
        safe = np.where(theta > _TINY, theta, 1.0)
        out = np.cos(theta) * z + np.sin(theta) * (w / safe)
        out = np.where(theta > _TINY, out, z + w)
        out = out - np.mean(out, axis=-1, keepdims=True)
        out = out / np.linalg.norm(out, axis=-1, keepdims=True)
        return _as_real(out)

    def _log(self, x, y):
        z = _as_complex(x)
        w = _as_complex(y)
        s = _herm(z, w)[..., None]
        r = np.abs(s)
        # Phase-align the target so the connecting geodesic is horizontal.
        aligned = w * np.where(r > _TINY, np.conj(s) / np.where(r > _TINY, r, 1.0), 1.0)
        rc = np.clip(r, 0.0, 1.0)
        theta = np.arccos(rc)
        perp = aligned - rc * z
        pn = np.linalg.norm(perp, axis=-1, keepdims=True)
        out = theta * perp / np.where(pn > _TINY, pn, 1.0)
        out = np.where(pn > _TINY, out, np.zeros_like(out))
        return _as_real(out)

    def _dist(self, x, y):
        z = _as_complex(x)
        w = _as_complex(y)
        return np.arccos(np.clip(np.abs(_herm(z, w)), 0.0, 1.0))

    def _transport(self, x, y, u):
        z = _as_complex(x)
        w = _as_complex(y)
        v = _as_complex(u)
        s = _herm(z, w)[..., None]
        r = np.abs(s)
        phase = np.where(r > _TINY, s / np.where(r > _TINY, r, 1.0), 1.0)
        aligned = w * np.conj(phase)
        rc = np.clip(r, 0.0, 1.0)
        theta = np.arccos(rc)
        perp = aligned - rc * z
        pn = np.linalg.norm(perp, axis=-1, keepdims=True)
        e = perp / np.where(pn > _TINY, pn, 1.0)
        # Complex coefficient moves both the e and i*e components at once.
        coeff = _herm(e, v)[..., None]
        moved = v + coeff * ((np.cos(theta) - 1.0) * e - np.sin(theta) * z)
        moved = np.where(pn > _TINY, moved, v)
        out = _as_real(moved * phase)
        return self._project_tangent(y, out)

    def _inner(self, x, u, w):
        return np.einsum("...i,...i->...", u, w)

    def _frame(self, x):
        k = self.landmarks
        z = x.reshape(k, 2)
        normals = np.zeros((4, 2 * k))
        normals[0, 0::2] = 1.0 / np.sqrt(k)   # real translation
        normals[1, 1::2] = 1.0 / np.sqrt(k)   # imaginary translation
        normals[2] = x                         # radial direction
        iz = np.empty_like(z)
        iz[:, 0] = -z[:, 1]
        iz[:, 1] = z[:, 0]
        normals[3] = iz.reshape(-1)            # vertical rotation direction
        proj = np.eye(2 * k) - normals.T @ normals
        u, sing, _ = np.linalg.svd(proj)
        return u[:, : self.dim].T

    def _gaussian_tangent(self, x, normals):
        return self._project_tangent(x, normals)

    def _random_point(self, rng, size=None):
        shape = (self.ambient_dim,) if size is None else (size, self.ambient_dim)
        raw = rng.standard_normal(shape)
        z = _as_complex(raw)
        z = z - np.mean(z, axis=-1, keepdims=True)
        return _as_real(z / np.linalg.norm(z, axis=-1, keepdims=True))

    # --- Jacobi adjoints -----------------------------------------------------
    # Curvature along a horizontal geodesic splits into three parallel
    # eigendirections: the geodesic direction itself (flat), the complex
    # rotation of it (sectional curvature 4), and the remaining horizontal
    # complement (sectional curvature 1).

    def _adjoint_dexp_p(self, x, vhat, rho, w):
        e = _as_complex(np.ascontiguousarray(np.broadcast_to(vhat, w.shape)))
        wc = _as_complex(w)
        coeff = _herm(e, wc)
        rest = wc - coeff[..., None] * e
        along = coeff.real[..., None] * e
        swirl = (np.cos(2.0 * rho) * coeff.imag)[..., None] * (1j * e)
        return _as_real(along + swirl + np.cos(rho)[..., None] * rest)

    def _adjoint_dexp_v(self, x, vhat, rho, w):
        e = _as_complex(np.ascontiguousarray(np.broadcast_to(vhat, w.shape)))
        wc = _as_complex(w)
        coeff = _herm(e, wc)
        rest = wc - coeff[..., None] * e
        safe = np.where(rho > _TINY, rho, 1.0)
        sc1 = np.where(rho > _TINY, np.sin(rho) / safe, 1.0)
        sc4 = np.where(rho > _TINY, np.sin(2.0 * rho) / (2.0 * safe), 1.0)
        along = coeff.real[..., None] * e
        swirl = (sc4 * coeff.imag)[..., None] * (1j * e)
        return _as_real(along + swirl + sc1[..., None] * rest)
