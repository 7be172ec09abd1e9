"""Model spaces of constant curvature: Euclidean, hyperboloid and sphere.

Points are plain ``numpy`` arrays. A :class:`ModelSpace` carries curvature
and dimension and knows how to measure, interpolate and move along
geodesics. Negative curvature is realized on the unit hyperboloid with all
distances scaled by ``1/sqrt(-kappa)``; positive curvature likewise on the
unit sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "DimensionError",
    "DomainError",
    "NonUniqueGeodesicError",
    "InvalidTriangleError",
    "ModelSpace",
    "Point",
    "TangentVector",
    "ComparisonTriangle",
    "PointDiagnostics",
    "minkowski_inner",
    "comparison_triangle",
    "validate_point",
]

CLAMP_TOL = 1e-9
POINT_TOL = 1e-12
TANGENT_TOL = 1e-10


class GeometryError(ValueError):
    pass


class DimensionError(GeometryError):
    pass


class DomainError(GeometryError):
    pass


class NonUniqueGeodesicError(GeometryError):
    pass


class InvalidTriangleError(GeometryError):
    pass


def minkowski_inner(u, v):
    """Lorentzian product ``-u0*v0 + sum_i ui*vi`` along the last axis."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-1] != v.shape[-1]:
        raise DimensionError(f"length mismatch: {u.shape[-1]} vs {v.shape[-1]}")
    if u.shape[-1] < 2:
        raise DimensionError("Minkowski product needs vectors of length >= 2")
    prod = u * v
    return np.sum(prod[..., 1:], axis=-1) - prod[..., 0]


def _coords(p):
    return np.asarray(getattr(p, "coords", p), dtype=float)


@dataclass(frozen=True)
class ModelSpace:
    """The model space of curvature ``curvature`` and dimension ``dim``."""

    curvature: float
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise GeometryError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "curvature", float(self.curvature))
        object.__setattr__(self, "dim", int(self.dim))

    # -- descriptors -----------------------------------------------------
    @property
    def kind(self) -> str:
        if self.curvature < 0:
            return "hyperbolic"
        if self.curvature > 0:
            return "spherical"
        return "euclidean"

    @property
    def d_kappa(self) -> float:
        if self.curvature > 0:
            return math.pi / math.sqrt(self.curvature)
        return math.inf

    @property
    def scale(self) -> float:
        """Factor converting unit-model distances into this space's metric."""
        if self.curvature == 0:
            return 1.0
        return 1.0 / math.sqrt(abs(self.curvature))

    @property
    def ambient_dim(self) -> int:
        return self.dim if self.curvature == 0 else self.dim + 1

    def base_point(self) -> np.ndarray:
        """``(1, 0, ..., 0)`` on hyperboloid/sphere, the origin in Euclidean space."""
        p = np.zeros(self.ambient_dim)
        if self.curvature != 0:
            p[0] = 1.0
        return p

    def to_dict(self) -> dict:
        return {"kappa": self.curvature, "dim": self.dim}

    @classmethod
    def from_dict(cls, d) -> "ModelSpace":
        return cls(curvature=d["kappa"], dim=d["dim"])

    # -- point handling --------------------------------------------------
    def _check(self, x):
        x = _coords(x)
        if x.shape[-1] != self.ambient_dim:
            raise DimensionError(
                f"expected coordinates of length {self.ambient_dim}, got {x.shape[-1]}"
            )
        return x

    def constraint_residual(self, x) -> float:
        x = self._check(x)
        if self.curvature < 0:
            return float(abs(minkowski_inner(x, x) + 1.0))
        if self.curvature > 0:
            return float(abs(np.linalg.norm(x) - 1.0))
        return 0.0

    def normalize(self, x) -> np.ndarray:
        """Rescale ``x`` back onto the model surface.

        Only meant to remove floating point drift; points far off the
        surface raise.
        """
        x = self._check(x).copy()
        if self.curvature < 0:
            q = -minkowski_inner(x, x)
            if q <= 0 or x[..., 0] <= 0:
                raise DomainError("point is not near the upper hyperboloid sheet")
            return x / math.sqrt(q)
        if self.curvature > 0:
            return x / np.linalg.norm(x)
        return x

    def from_euclidean(self, v) -> np.ndarray:
        """Lift spatial coordinates ``v`` (length ``dim``) onto the model.

        For the hyperboloid this sets ``u0 = sqrt(1 + |v|^2)``.
        """
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise DimensionError(f"expected {self.dim} spatial coordinates")
        if self.curvature == 0:
            return v.copy()
        if self.curvature < 0:
            u0 = np.sqrt(1.0 + np.sum(v * v, axis=-1, keepdims=True))
            return np.concatenate([u0, v], axis=-1)
        n = np.sum(v * v, axis=-1, keepdims=True)
        if np.any(n > 1):
            raise DomainError("spatial part exceeds the unit sphere")
        return np.concatenate([np.sqrt(1.0 - n), v], axis=-1)

    # -- metric ----------------------------------------------------------
    def _unit_dist(self, x, y):
        # Chord formulas stay accurate for nearby points, where arcosh/arccos
        # of a product near 1 would lose half the digits.
        if self.curvature < 0:
            c = -minkowski_inner(x, y)
            if np.any(c < 1.0 - CLAMP_TOL):
                raise DomainError(f"arcosh argument {np.min(c)!r} below 1")
            diff = x - y
            chord2 = np.maximum(minkowski_inner(diff, diff), 0.0)
            return 2.0 * np.arcsinh(np.sqrt(chord2) / 2.0)
        if self.curvature > 0:
            c = np.sum(x * y, axis=-1)
            if np.any(np.abs(c) > 1.0 + CLAMP_TOL):
                raise DomainError(f"arccos argument {c!r} outside [-1, 1]")
            chord = np.linalg.norm(x - y, axis=-1)
            return 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))
        return np.linalg.norm(x - y, axis=-1)

    def dist(self, x, y):
        """Geodesic distance; broadcasts over leading axes."""
        x = self._check(x)
        y = self._check(y)
        d = self._unit_dist(x, y) * self.scale
        return float(d) if np.ndim(d) == 0 else d

    # -- geodesics -------------------------------------------------------
    def combine(self, x, y, t: float) -> np.ndarray:
        """The point ``(1 - t) x (+) t y`` on the geodesic segment ``[x, y]``.

        It sits at distance ``t * d(x, y)`` from ``x`` and
        ``(1 - t) * d(x, y)`` from ``y``.

        Raises
        ------
        NonUniqueGeodesicError
            On the sphere, when ``x`` and ``y`` are (numerically) antipodal.
        """
        x = self._check(x)
        y = self._check(y)
        if t == 0.0:
            return x.copy()
        if t == 1.0:
            return y.copy()
        if self.curvature == 0:
            return (1.0 - t) * x + t * y
        D = float(self._unit_dist(x, y))
        if self.curvature > 0 and D >= math.pi - 1e-7:
            raise NonUniqueGeodesicError("antipodal points: geodesic is not unique")
        if D == 0.0:
            return x.copy()
        if self.curvature < 0:
            z = (math.sinh((1.0 - t) * D) * x + math.sinh(t * D) * y) / math.sinh(D)
        else:
            z = (math.sin((1.0 - t) * D) * x + math.sin(t * D) * y) / math.sin(D)
        return self.normalize(z)

    def midpoint(self, x, y) -> np.ndarray:
        return self.combine(x, y, 0.5)

    # -- tangent spaces --------------------------------------------------
    def inner(self, x, u, v):
        """Riemannian metric of this space at ``x`` (ambient coordinates)."""
        if self.curvature < 0:
            return minkowski_inner(u, v) / -self.curvature
        if self.curvature > 0:
            return np.sum(np.asarray(u) * np.asarray(v), axis=-1) / self.curvature
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def norm(self, x, v) -> float:
        return math.sqrt(max(float(self.inner(x, v, v)), 0.0))

    def project_tangent(self, x, v) -> np.ndarray:
        """Orthogonal projection of an ambient vector onto the tangent space at ``x``."""
        x = self._check(x)
        v = np.asarray(v, dtype=float)
        if self.curvature < 0:
            return v + minkowski_inner(x, v)[..., None] * x
        if self.curvature > 0:
            return v - np.sum(x * v, axis=-1)[..., None] * x
        return v

    def exp(self, x, v) -> np.ndarray:
        x = self._check(x)
        v = np.asarray(v, dtype=float)
        if self.curvature == 0:
            return x + v
        # arc length on the unit model
        if self.curvature < 0:
            r = math.sqrt(max(float(minkowski_inner(v, v)), 0.0))
        else:
            r = float(np.linalg.norm(v))
        if r == 0.0:
            return x.copy()
        if self.curvature < 0:
            y = math.cosh(r) * x + (math.sinh(r) / r) * v
        else:
            y = math.cos(r) * x + (math.sin(r) / r) * v
        return self.normalize(y)

    def log(self, x, y) -> np.ndarray:
        """Inverse of :meth:`exp`; broadcasts over leading axes of ``y``."""
        x = self._check(x)
        y = self._check(y)
        if self.curvature == 0:
            return y - x
        D = np.asarray(self._unit_dist(x, y))
        if self.curvature < 0:
            v = y - np.cosh(D)[..., None] * x
            with np.errstate(invalid="ignore", divide="ignore"):
                f = np.where(D > 0, D / np.sinh(np.where(D > 0, D, 1.0)), 1.0)
        else:
            if np.any(D >= math.pi - 1e-7):
                raise NonUniqueGeodesicError("log undefined at the antipode")
            v = y - np.cos(D)[..., None] * x
            f = np.where(D > 0, D / np.sin(np.where(D > 0, D, 1.0)), 1.0)
        v = self.project_tangent(x, f[..., None] * v)
        return np.where((D > 0)[..., None], v, 0.0)

    # -- sampling --------------------------------------------------------
    def random_tangent_direction(self, rng, x=None) -> np.ndarray:
        """Unit-length (model norm) tangent vector at ``x`` (default: base point)."""
        x = self.base_point() if x is None else self._check(x)
        while True:
            v = self.project_tangent(x, rng.standard_normal(self.ambient_dim))
            n = self.norm(x, v)
            if n > 1e-8:
                return v / n

    def random_point(self, rng, radius: float = 1.0, center=None) -> np.ndarray:
        """A point at distance ``<= radius`` from ``center`` (default: base point)."""
        c = self.base_point() if center is None else self._check(center)
        r = radius * rng.uniform() ** (1.0 / self.dim)
        return self.exp(c, r * self.random_tangent_direction(rng, c))


@dataclass(frozen=True)
class Point:
    """Coordinates tagged with the space they live in."""

    space: ModelSpace
    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        self.space._check(c)

    def to_dict(self) -> dict:
        return {"space": self.space.to_dict(), "coords": [float(v) for v in self.coords]}

    @classmethod
    def from_dict(cls, d) -> "Point":
        return cls(ModelSpace.from_dict(d["space"]), np.asarray(d["coords"], dtype=float))


@dataclass(frozen=True)
class TangentVector:
    base: Point
    vec: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.vec, dtype=float)
        if v.shape != self.base.coords.shape:
            raise DimensionError("tangent vector length differs from base point")
        sp = self.base.space
        if sp.curvature < 0:
            r = abs(float(minkowski_inner(self.base.coords, v)))
        elif sp.curvature > 0:
            r = abs(float(np.dot(self.base.coords, v)))
        else:
            r = 0.0
        if r > TANGENT_TOL:
            raise GeometryError(f"vector not tangent at base (residual {r:.3g})")
        object.__setattr__(self, "vec", v)

    @property
    def norm(self) -> float:
        return self.base.space.norm(self.base.coords, self.vec)


@dataclass(frozen=True)
class PointDiagnostics:
    residual: float
    passed: bool
    upper_sheet: bool = True


def validate_point(space: ModelSpace, coords, tol: float = POINT_TOL) -> PointDiagnostics:
    """Report how far ``coords`` is from satisfying the model constraint."""
    c = _coords(coords)
    res = space.constraint_residual(c)
    upper = bool(c[0] > 0) if space.curvature < 0 else True
    return PointDiagnostics(residual=res, passed=res <= tol and upper, upper_sheet=upper)


@dataclass(frozen=True)
class ComparisonTriangle:
    """Euclidean triangle with sides ``|v0 v1| = a``, ``|v1 v2| = b``, ``|v2 v0| = c``."""

    vertices_plane: tuple
    side_lengths: tuple

    def point_on_side(self, i: int, j: int, t: float) -> np.ndarray:
        """The comparison point at fraction ``t`` from vertex ``i`` toward ``j``."""
        vi = np.asarray(self.vertices_plane[i])
        vj = np.asarray(self.vertices_plane[j])
        return (1.0 - t) * vi + t * vj


def comparison_triangle(a: float, b: float, c: float, tol: float = 1e-12) -> ComparisonTriangle:
    """Planar triangle with side lengths ``a = |v0 v1|``, ``b = |v1 v2|``, ``c = |v2 v0|``.

    ``v0`` is the origin, ``v1 = (a, 0)`` and ``v2`` is placed in the upper
    half-plane by the law of cosines.
    """
    sides = (float(a), float(b), float(c))
    if min(sides) < 0:
        raise InvalidTriangleError("side lengths must be nonnegative")
    for i in range(3):
        if sides[i] > sides[(i + 1) % 3] + sides[(i + 2) % 3] + tol:
            raise InvalidTriangleError(f"triangle inequality violated by {sides}")
    a, b, c = sides
    if a < 1e-150:  # squares of such sides underflow; treat as a point
        v2 = (c, 0.0)
    else:
        # clamped: sides consistent only to rounding can push x past c
        x = min(max(0.5 * a + (c - b) * (c + b) / (2.0 * a), -c), c)
        # height from the area; Kahan's ordering of Heron's formula avoids the
        # cancellation in sqrt(c^2 - x^2) for needle-shaped triangles, and
        # rooting each factor avoids underflow for tiny sides
        p, q, r = sorted(sides, reverse=True)
        factors = (p + (q + r), r - (p - q), r + (p - q), p + (q - r))
        y = math.prod(math.sqrt(max(f, 0.0)) for f in factors) / (2.0 * a)
        v2 = (x, y)
    return ComparisonTriangle(vertices_plane=((0.0, 0.0), (a, 0.0), v2), side_lengths=sides)
