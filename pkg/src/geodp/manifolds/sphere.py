"""Unit sphere S^2 embedded in R^3 with the round metric."""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateInput
from ..geometry import Manifold

_TINY = 1e-14


class Sphere(Manifold):
    """Unit two-sphere; curvature 1, injectivity radius pi."""

    kind = "sphere"

    @property
    def dim(self) -> int:
        return 2

    @property
    def ambient_dim(self) -> int:
        return 3

    @property
    def curvature_bounds(self) -> tuple[float, float]:
        return (1.0, 1.0)

    @property
    def injectivity_radius(self) -> float:
        return np.pi

    @property
    def cut_locus_radius(self) -> float:
        return np.pi - 1e-6

    @property
    def closed_form_gradients(self) -> bool:
        return True

    def __eq__(self, other):
        return isinstance(other, Sphere)

    def __hash__(self):
        return hash(self.kind)

    # --- kernels -----------------------------------------------------------

    def _point_defect(self, x):
        return np.abs(np.linalg.norm(x, axis=-1) - 1.0)

    def _project(self, raw):
        n = np.linalg.norm(raw, axis=-1, keepdims=True)
        if np.any(n < 1e-12):
            raise DegenerateInput("cannot project the origin onto the sphere")
        return raw / n

    def _tangent_defect(self, x, u):
        return np.abs(np.einsum("...i,...i->...", x, u))

    def _project_tangent(self, x, u):
        return u - np.einsum("...i,...i->...", x, u)[..., None] * x

    def _exp(self, x, u):
        theta = np.linalg.norm(u, axis=-1, keepdims=True)
        safe = np.where(theta > _TINY, theta, 1.0)
        out = np.cos(theta) * x + np.sin(theta) * (u / safe)
        out = np.where(theta > _TINY, out, x + u)
        return out / np.linalg.norm(out, axis=-1, keepdims=True)

    def _log(self, x, y):
        c = np.clip(np.einsum("...i,...i->...", x, y), -1.0, 1.0)[..., None]
        theta = np.arccos(c)
        w = y - c * x
        wn = np.linalg.norm(w, axis=-1, keepdims=True)
        out = theta * w / np.where(wn > _TINY, wn, 1.0)
        return np.where(wn > _TINY, out, np.zeros_like(out))

    def _dist(self, x, y):
        c = np.clip(np.einsum("...i,...i->...", x, y), -1.0, 1.0)
        return np.arccos(c)

    def _transport(self, x, y, u):
        v = self._log(x, y)
        theta = np.linalg.norm(v, axis=-1, keepdims=True)
        e = v / np.where(theta > _TINY, theta, 1.0)
        a = np.einsum("...i,...i->...", u, e)[..., None]
        moved = u + a * ((np.cos(theta) - 1.0) * e - np.sin(theta) * x)
        out = np.where(theta > _TINY, moved, u)
        return self._project_tangent(y, out)

    def _inner(self, x, u, w):
        return np.einsum("...i,...i->...", u, w)

    def _frame(self, x):
        k = int(np.argmin(np.abs(x)))
        h = np.zeros(3)
        h[k] = 1.0
        b1 = h - np.dot(h, x) * x
        b1 /= np.linalg.norm(b1)
        b2 = np.cross(x, b1)
        return np.stack([b1, b2])

    def _gaussian_tangent(self, x, normals):
        return self._project_tangent(x, normals)

    def _random_point(self, rng, size=None):
        shape = (3,) if size is None else (size, 3)
        raw = rng.standard_normal(shape)
        return raw / np.linalg.norm(raw, axis=-1, keepdims=True)

    def _grad_energy_rows(self, p, v, x, Y, wrt):
        # Fused energy gradient.  Differentiating cos d_i = <exp_p(x_i v), y_i>
        # directly needs only (B, n) dot-product arrays and two matmuls,
        # instead of the (B, n, 3) prediction / log / transport intermediates
        # of the generic route; this dominates the sampler's step cost.
        nv = np.linalg.norm(v, axis=-1, keepdims=True)
        u = v / np.where(nv > _TINY, nv, 1.0)
        a = p @ Y.T
        b = u @ Y.T
        theta = x[None, :] * nv
        ct = np.cos(theta)
        st = np.sin(theta)
        d = np.arccos(np.clip(ct * a + st * b, -1.0, 1.0))
        valid = np.all(d < self.cut_locus_radius, axis=-1)
        w = 1.0 / np.sinc(d / np.pi)  # d / sin(d), equal to 1 at d = 0
        if wrt == "p":
            coef_y = w * ct
            coef_u = -np.sum(w * st * a, axis=-1)
        else:
            sc = x[None, :] * np.sinc(theta / np.pi)  # sin(theta) / |v|
            coef_y = w * sc
            coef_u = np.sum(w * (x[None, :] * (ct * b - st * a) - sc * b), axis=-1)
        g = -(coef_y @ Y + coef_u[:, None] * u) / x.size
        return self._project_tangent(p, g), valid

    # --- Jacobi adjoints -----------------------------------------------------
    # Constant curvature 1: the component of w parallel to the geodesic
    # direction is preserved, the orthogonal component scales by cos(rho)
    # for footpoint variations and sin(rho)/rho for velocity variations.

    def _adjoint_dexp_p(self, x, vhat, rho, w):
        par = np.einsum("...i,...i->...", w, vhat)[..., None]
        along = par * vhat
        return along + np.cos(rho)[..., None] * (w - along)

    def _adjoint_dexp_v(self, x, vhat, rho, w):
        par = np.einsum("...i,...i->...", w, vhat)[..., None]
        along = par * vhat
        sc = np.where(rho > _TINY, np.sin(rho) / np.where(rho > _TINY, rho, 1.0), 1.0)
        return along + sc[..., None] * (w - along)
