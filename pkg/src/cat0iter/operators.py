"""Nonexpansive maps and contractions used as iteration targets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import DimensionError, GeometryError, ModelSpace

__all__ = [
    "OperatorError",
    "SequenceSpace",
    "Operator",
    "Identity",
    "PlanarRotation",
    "EllipticRotation",
    "RightShift",
    "GeodesicContraction",
    "ForwardOperator",
    "ConstantAnchor",
    "Scaling",
    "NonexpansiveReport",
    "check_nonexpansive",
    "operator_from_dict",
]


class OperatorError(GeometryError):
    pass


@dataclass(frozen=True)
class SequenceSpace:
    """Finite prefixes of l^1 sequences with the l^1 norm.

    Quacks like :class:`~cat0iter.geometry.ModelSpace` for the iteration
    drivers: it has ``dist``, ``combine`` and ``normalize``.
    """

    length: int
    curvature: float = field(default=0.0, init=False)

    @property
    def ambient_dim(self) -> int:
        return self.length

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.length:
            raise DimensionError(f"expected a sequence of length {self.length}")
        return x

    def dist(self, x, y) -> float:
        return float(np.sum(np.abs(self._check(x) - self._check(y)), axis=-1))

    def combine(self, x, y, t: float) -> np.ndarray:
        x, y = self._check(x), self._check(y)
        if t == 0.0:
            return x.copy()
        if t == 1.0:
            return y.copy()
        return (1.0 - t) * x + t * y

    def normalize(self, x):
        return self._check(x)

    def unit(self, i: int = 0) -> np.ndarray:
        e = np.zeros(self.length)
        e[i] = 1.0
        return e

    def to_dict(self) -> dict:
        return {"sequence_length": self.length}


class Operator:
    """Base class: ``op(x)`` applies the map to coordinates ``x``."""

    kind = "operator"
    nonexpansive = True
    #: Lipschitz constant advertised for the map (``None`` if unknown).
    lipschitz: float | None = 1.0
    space: object

    def __call__(self, x) -> np.ndarray:
        x = self.space._check(x)
        return self._apply(x)

    def _apply(self, x):
        raise NotImplementedError

    def fixed_point(self):
        """A known fixed point, or ``None``."""
        return None

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params()}


@dataclass(frozen=True, eq=False)
class Identity(Operator):
    space: ModelSpace
    kind = "identity"

    def _apply(self, x):
        return x.copy()


def _rotation_block(x, angle, i, j):
    y = x.copy()
    c, s = math.cos(angle), math.sin(angle)
    y[..., i] = c * x[..., i] - s * x[..., j]
    y[..., j] = s * x[..., i] + c * x[..., j]
    return y


@dataclass(frozen=True, eq=False)
class PlanarRotation(Operator):
    """Counter-clockwise rotation of the first two Euclidean coordinates."""

    space: ModelSpace
    angle: float
    kind = "planar_rotation"

    def __post_init__(self):
        if self.space.curvature != 0 or self.space.dim < 2:
            raise OperatorError("planar_rotation needs a Euclidean space of dim >= 2")

    def _apply(self, x):
        return _rotation_block(x, self.angle, 0, 1)

    def fixed_point(self):
        return np.zeros(self.space.ambient_dim)

    def params(self):
        return {"angle": self.angle}


@dataclass(frozen=True, eq=False)
class EllipticRotation(Operator):
    """Rotation of ``(u1, u2)`` on the hyperboloid, leaving ``u0`` alone.

    A Lorentz isometry fixing the base point ``(1, 0, ..., 0)``.
    """

    space: ModelSpace
    angle: float
    kind = "elliptic_rotation"

    def __post_init__(self):
        if self.space.curvature >= 0 or self.space.dim < 2:
            raise OperatorError("elliptic_rotation needs a hyperboloid of dim >= 2")

    def _apply(self, x):
        return self.space.normalize(_rotation_block(x, self.angle, 1, 2))

    def fixed_point(self):
        return self.space.base_point()

    def params(self):
        return {"angle": self.angle}


@dataclass(frozen=True, eq=False)
class RightShift(Operator):
    """``(x0, x1, ...) -> (0, x0, x1, ...)`` on l^1 prefixes.

    Refuses to drop mass off the end of the stored prefix.
    """

    space: SequenceSpace
    kind = "right_shift"

    def _apply(self, x):
        if x[..., -1] != 0.0:
            raise OperatorError("right_shift would truncate mass; enlarge the sequence")
        y = np.zeros_like(x)
        y[..., 1:] = x[..., :-1]
        return y

    def fixed_point(self):
        return np.zeros(self.space.length)

    def params(self):
        return {"dim": self.space.length}


@dataclass(frozen=True, eq=False)
class GeodesicContraction(Operator):
    """``x -> combine(center, x, beta)``: a beta-contraction toward ``center``."""

    space: ModelSpace
    center: np.ndarray
    beta: float
    kind = "geodesic_contraction"

    def __post_init__(self):
        if not 0.0 <= self.beta < 1.0:
            raise OperatorError(f"contraction factor must lie in [0, 1), got {self.beta}")
        object.__setattr__(self, "center", self.space._check(self.center).copy())

    @property
    def lipschitz(self):
        return self.beta

    def _apply(self, x):
        return self.space.combine(self.center, x, self.beta)

    def fixed_point(self):
        return self.center.copy()

    def params(self):
        return {"center": self.center.tolist(), "beta": self.beta}


@dataclass(frozen=True, eq=False)
class ForwardOperator(Operator):
    """Gradient step ``x - step * grad(x)`` on a Euclidean space.

    Averaged nonexpansive when the objective is convex with an
    ``L``-Lipschitz gradient and ``0 < step < 2 / L``.
    """

    space: ModelSpace
    grad: Callable
    step: float
    L: float
    quadratic: tuple | None = None
    kind = "forward"

    def __post_init__(self):
        if self.space.curvature != 0:
            raise OperatorError("forward operator is only defined on Euclidean space")
        if not 0.0 < self.step < 2.0 / self.L:
            raise OperatorError(f"step must lie in (0, 2/L) = (0, {2.0 / self.L})")

    def _apply(self, x):
        return x - self.step * np.asarray(self.grad(x), dtype=float)

    def params(self):
        p = {"step": self.step, "L": self.L}
        if self.quadratic is not None:
            A, b = self.quadratic
            p.update(A=np.asarray(A).tolist(), b=np.asarray(b).tolist())
        return p


@dataclass(frozen=True, eq=False)
class ConstantAnchor(Operator):
    """``x -> u``; turns the viscosity iteration into Halpern's."""

    space: ModelSpace
    anchor: np.ndarray
    kind = "constant_anchor"
    lipschitz = 0.0

    def __post_init__(self):
        object.__setattr__(self, "anchor", self.space._check(self.anchor).copy())

    @property
    def beta(self):
        return 0.0

    def _apply(self, x):
        return self.anchor.copy()

    def fixed_point(self):
        return self.anchor.copy()

    def params(self):
        return {"anchor": self.anchor.tolist()}


@dataclass(frozen=True, eq=False)
class Scaling(Operator):
    """``x -> factor * x`` in Euclidean space. Expansive for factor > 1; test fixture."""

    space: ModelSpace
    factor: float
    kind = "scaling"

    def __post_init__(self):
        if self.space.curvature != 0:
            raise OperatorError("scaling is only defined on Euclidean space")

    @property
    def lipschitz(self):
        return abs(self.factor)

    @property
    def nonexpansive(self):
        return abs(self.factor) <= 1.0

    def _apply(self, x):
        return self.factor * x

    def fixed_point(self):
        return np.zeros(self.space.ambient_dim)

    def params(self):
        return {"factor": self.factor}


@dataclass
class NonexpansiveReport:
    trials: int
    max_excess: float
    max_ratio: float
    passed: bool
    tol: float


def check_nonexpansive(op: Operator, sampler, trials: int = 1000, tol: float = 1e-9):
    """Sample pairs and record the worst ``d(Tx, Ty) - d(x, y)``.

    ``sampler()`` must return a pair of points. For contractions the
    advertised factor is checked as well: ``d(Tx, Ty) <= beta * d(x, y) + tol``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sp = op.space
    factor = op.lipschitz if op.lipschitz is not None else 1.0
    factor = min(factor, 1.0)
    worst, worst_ratio, ok = -math.inf, 0.0, True
    for _ in range(trials):
        x, y = sampler()
        dxy = sp.dist(x, y)
        dT = sp.dist(op(x), op(y))
        worst = max(worst, dT - dxy)
        if dxy > 0:
            worst_ratio = max(worst_ratio, dT / dxy)
        if dT > factor * dxy + tol:
            ok = False
    return NonexpansiveReport(trials, worst, worst_ratio, ok and worst <= tol, tol)


def operator_from_dict(d: dict, space) -> Operator:
    """Build an operator from its config dict (``{"kind": ..., **params}``)."""
    kind = d["kind"]
    if kind == "identity":
        return Identity(space)
    if kind == "planar_rotation":
        return PlanarRotation(space, float(d["angle"]))
    if kind == "elliptic_rotation":
        return EllipticRotation(space, float(d["angle"]))
    if kind == "right_shift":
        return RightShift(space if isinstance(space, SequenceSpace) else SequenceSpace(int(d["dim"])))
    if kind == "geodesic_contraction":
        return GeodesicContraction(space, np.asarray(d["center"], dtype=float), float(d["beta"]))
    if kind == "constant_anchor":
        return ConstantAnchor(space, np.asarray(d["anchor"], dtype=float))
    if kind == "scaling":
        return Scaling(space, float(d["factor"]))
    if kind == "forward":
        # Only quadratic objectives 0.5 x^T A x - b^T x are configurable.
        A = np.asarray(d["A"], dtype=float)
        b = np.asarray(d.get("b", np.zeros(len(A))), dtype=float)
        L = float(d.get("L", np.max(np.linalg.eigvalsh(A))))
        return ForwardOperator(space, lambda x: A @ x - b, float(d["step"]), L, quadratic=(A, b))
    raise OperatorError(f"unknown operator kind {kind!r}")
