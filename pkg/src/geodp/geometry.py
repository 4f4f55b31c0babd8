"""Core Riemannian interface: points, tangent vectors, and the manifold
operations built on top of them.

Coordinates are extrinsic: a point or tangent vector is a dense 1-D float
array in the manifold's ambient representation.  The private kernel methods
(``_exp``, ``_log``, ...) accept arbitrary leading batch dimensions and
broadcast like ufuncs; the public wrappers add the contract checks (membership,
tangency, guards) and work on single points.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import (
    BaseMismatch,
    CutLocusError,
    DomainError,
    InvalidTangent,
    ManifoldMismatch,
)

MEMBERSHIP_TOL = 1e-10
TANGENCY_TOL = 1e-10


@dataclass(eq=False)
class ManifoldPoint:
    """A point on a manifold, stored as ambient coordinates."""

    manifold: "Manifold"
    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.shape != (self.manifold.ambient_dim,):
            raise ValueError(
                f"expected coords of shape ({self.manifold.ambient_dim},), "
                f"got {self.coords.shape}"
            )
        defect = float(self.manifold._point_defect(self.coords))
        if not defect <= MEMBERSHIP_TOL:
            raise ValueError(f"coords violate membership (defect {defect:.3e})")

    def __eq__(self, other):
        return (
            isinstance(other, ManifoldPoint)
            and self.manifold == other.manifold
            and np.array_equal(self.coords, other.coords)
        )


@dataclass(eq=False)
class TangentVec:
    """A tangent vector attached to a base point, in ambient coordinates."""

    base: ManifoldPoint
    components: np.ndarray

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float)
        man = self.base.manifold
        if self.components.shape != (man.ambient_dim,):
            raise ValueError(
                f"expected components of shape ({man.ambient_dim},), "
                f"got {self.components.shape}"
            )
        defect = float(man._tangent_defect(self.base.coords, self.components))
        scale = max(1.0, float(np.linalg.norm(self.components)))
        if not defect <= TANGENCY_TOL * scale:
            raise ValueError(f"components violate tangency (defect {defect:.3e})")

    @property
    def manifold(self) -> "Manifold":
        return self.base.manifold

    def __eq__(self, other):
        return (
            isinstance(other, TangentVec)
            and self.base == other.base
            and np.array_equal(self.components, other.components)
        )


class Manifold(ABC):
    """Abstract manifold with batched array kernels and checked wrappers.

    Subclasses implement the underscore kernels on raw arrays.  Kernels do not
    validate membership or guards; the public wrappers do.  Every kernel
    broadcasts over leading batch dimensions.
    """

    kind: str = ""

    # --- identity ----------------------------------------------------------

    @property
    @abstractmethod
    def dim(self) -> int:
        """Intrinsic dimension."""

    @property
    @abstractmethod
    def ambient_dim(self) -> int:
        """Length of the coordinate representation."""

    @property
    @abstractmethod
    def curvature_bounds(self) -> tuple[float, float]:
        """(kappa_l, kappa_h): lower and upper sectional curvature bounds."""

    @property
    @abstractmethod
    def injectivity_radius(self) -> float:
        """Norm guard for exp_map inputs (may be inf)."""

    @property
    def cut_locus_radius(self) -> float:
        """Distance guard for log_map and parallel_transport (may be inf)."""
        return np.inf

    @property
    def closed_form_gradients(self) -> bool:
        """Whether the Jacobi adjoint kernels are implemented."""
        return False

    def _grad_energy_rows(self, p, v, x, Y, wrt):
        # Optional fused override of the regression gradient; None falls back
        # to the generic adjoint or finite-difference route.
        return None

    def spec(self) -> dict:
        """JSON-friendly identity used in files and provenance blocks."""
        return {"kind": self.kind}

    def __repr__(self):
        return f"{type(self).__name__}()"

    # --- raw kernels --------------------------------------------------------

    @abstractmethod
    def _point_defect(self, x: np.ndarray) -> np.ndarray:
        """Scalar membership defect per point; 0 on the manifold."""

    @abstractmethod
    def _project(self, raw: np.ndarray) -> np.ndarray:
        """Nearest-point style projection of raw coordinates."""

    @abstractmethod
    def _tangent_defect(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Scalar tangency defect per vector; 0 when u is tangent at x."""

    @abstractmethod
    def _project_tangent(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Metric-orthogonal projection of u onto the tangent space at x."""

    @abstractmethod
    def _exp(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Geodesic exponential (re-projected to the manifold)."""

    @abstractmethod
    def _log(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Inverse exponential; unguarded, caller masks cut-locus rows."""

    @abstractmethod
    def _dist(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Geodesic distance."""

    @abstractmethod
    def _transport(self, x: np.ndarray, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Parallel transport of u from x to y along the connecting geodesic."""

    @abstractmethod
    def _inner(self, x: np.ndarray, u: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Riemannian inner product at x."""

    def _norm(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(self._inner(x, u, u), 0.0))

    @abstractmethod
    def _frame(self, x: np.ndarray) -> np.ndarray:
        """Orthonormal tangent basis at a single point, shape (dim, ambient)."""

    def _frame_many(self, x: np.ndarray) -> np.ndarray:
        """Frames for a batch of points, shape (..., dim, ambient)."""
        if x.ndim == 1:
            return self._frame(x)
        flat = x.reshape(-1, x.shape[-1])
        frames = np.stack([self._frame(row) for row in flat])
        return frames.reshape(x.shape[:-1] + frames.shape[1:])

    @abstractmethod
    def _gaussian_tangent(self, x: np.ndarray, normals: np.ndarray) -> np.ndarray:
        """Map ambient standard normals to a metric-isotropic Gaussian at x."""

    @abstractmethod
    def _random_point(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Random point coordinates for tests and generators."""

    # Jacobi adjoint kernels, only on closed-form manifolds.  vhat is the unit
    # geodesic direction at x, rho the geodesic parameter length, w a vector
    # already transported back to x.
    def _adjoint_dexp_p(self, x, vhat, rho, w) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} has no closed-form Jacobi adjoint")

    def _adjoint_dexp_v(self, x, vhat, rho, w) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} has no closed-form Jacobi adjoint")

    # --- checked public API ---------------------------------------------------

    def point(self, coords) -> ManifoldPoint:
        """Wrap coordinates that already satisfy membership."""
        return ManifoldPoint(self, np.asarray(coords, dtype=float))

    def project_to_manifold(self, raw) -> ManifoldPoint:
        """Project raw ambient coordinates onto the manifold."""
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (self.ambient_dim,):
            raise ValueError(f"expected shape ({self.ambient_dim},), got {raw.shape}")
        return ManifoldPoint(self, self._project(raw))

    def tangent(self, p: ManifoldPoint, components) -> TangentVec:
        """Wrap components that already satisfy tangency at p."""
        self._require_point(p)
        return TangentVec(p, np.asarray(components, dtype=float))

    def zero_tangent(self, p: ManifoldPoint) -> TangentVec:
        self._require_point(p)
        return TangentVec(p, np.zeros(self.ambient_dim))

    def project_to_tangent(self, p: ManifoldPoint, raw) -> TangentVec:
        """Project raw ambient components onto the tangent space at p."""
        self._require_point(p)
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (self.ambient_dim,):
            raise ValueError(f"expected shape ({self.ambient_dim},), got {raw.shape}")
        return TangentVec(p, self._project_tangent(p.coords, raw))

    def exp_map(self, p: ManifoldPoint, v: TangentVec) -> ManifoldPoint:
        """Follow the geodesic from p with initial velocity v for unit time."""
        self._require_point(p)
        if not (v.base == p):
            raise InvalidTangent("tangent vector is not based at p")
        speed = float(self._norm(p.coords, v.components))
        if not speed < self.injectivity_radius:
            raise DomainError(
                f"tangent norm {speed:.6g} exceeds the injectivity guard "
                f"{self.injectivity_radius:.6g}"
            )
        return ManifoldPoint(self, self._exp(p.coords, v.components))

    def log_map(self, p: ManifoldPoint, q: ManifoldPoint) -> TangentVec:
        """Initial velocity of the minimizing geodesic from p to q."""
        self._require_point(p)
        self._require_point(q)
        d = float(self._dist(p.coords, q.coords))
        if not d < self.cut_locus_radius:
            raise CutLocusError(
                f"distance {d:.6g} reaches the cut-locus guard "
                f"{self.cut_locus_radius:.6g}"
            )
        return TangentVec(p, self._log(p.coords, q.coords))

    def dist(self, p: ManifoldPoint, q: ManifoldPoint) -> float:
        self._require_point(p)
        self._require_point(q)
        return float(self._dist(p.coords, q.coords))

    def parallel_transport(self, v: TangentVec, q: ManifoldPoint) -> TangentVec:
        """Transport v along the minimizing geodesic from its base to q."""
        self._require_point(v.base)
        self._require_point(q)
        d = float(self._dist(v.base.coords, q.coords))
        if not d < self.cut_locus_radius:
            raise CutLocusError(
                f"distance {d:.6g} reaches the cut-locus guard "
                f"{self.cut_locus_radius:.6g}"
            )
        return TangentVec(q, self._transport(v.base.coords, q.coords, v.components))

    def inner(self, u: TangentVec, w: TangentVec) -> float:
        if not (u.base == w.base):
            raise BaseMismatch("tangent vectors are based at different points")
        return float(self._inner(u.base.coords, u.components, w.components))

    def norm(self, u: TangentVec) -> float:
        self._require_point(u.base)
        return float(self._norm(u.base.coords, u.components))

    def tangent_basis(self, p: ManifoldPoint) -> list[TangentVec]:
        """Metric-orthonormal basis of the tangent space at p."""
        self._require_point(p)
        frame = self._frame(p.coords)
        return [TangentVec(p, row) for row in frame]

    def random_point(self, rng: np.random.Generator) -> ManifoldPoint:
        return ManifoldPoint(self, self._random_point(rng))

    def random_tangent(self, p: ManifoldPoint, rng: np.random.Generator,
                       scale: float = 1.0) -> TangentVec:
        """Metric-isotropic Gaussian tangent vector at p."""
        self._require_point(p)
        normals = rng.standard_normal(self.ambient_dim)
        return TangentVec(p, scale * self._gaussian_tangent(p.coords, normals))

    # --- helpers ---------------------------------------------------------------

    def _require_point(self, p: ManifoldPoint) -> None:
        if p.manifold != self:
            raise ManifoldMismatch(
                f"point lives on {p.manifold.kind!r}, expected {self.kind!r}"
            )
