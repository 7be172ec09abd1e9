"""Proximal resolvents on Hadamard model spaces and the anchored (Halpern) descent built on them.

The resolvent of ``f`` with scale ``lam`` is
``J(x) = argmin_y f(y) + d(x, y)^2 / (2 lam)``. It is firmly nonexpansive
on CAT(0) spaces and its fixed points are exactly the minimizers of ``f``,
which makes it a drop-in replacement for the Euclidean forward step inside
a Halpern iteration.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .geometry import GeometryError, ModelSpace
from .iteration import Trace, fmt
from .schedules import Schedule

__all__ = [
    "OptimizerError",
    "ResolventError",
    "Objective",
    "ResolventSpec",
    "OptRun",
    "resolvent_closed_form",
    "resolvent_numeric",
    "resolvent",
    "hyperbolic_halpern_gd",
    "rsgd_run",
    "frechet_oracle",
]


class OptimizerError(ValueError):
    pass


class ResolventError(OptimizerError):
    def __init__(self, msg, grad_norm=None, point=None):
        super().__init__(msg)
        self.grad_norm = grad_norm
        self.point = point


@dataclass(frozen=True, eq=False)
class Objective:
    """A geodesically convex objective with a Riemannian gradient.

    Use :meth:`half_sq_dist`, :meth:`frechet` or :meth:`custom` to build one.
    """

    kind: str
    space: ModelSpace
    anchors: np.ndarray | None = None
    weights: np.ndarray | None = None
    value_fn: Callable | None = None
    grad_fn: Callable | None = None

    def __post_init__(self):
        if self.kind in ("half_sq_dist", "frechet"):
            A = np.atleast_2d(self.space._check(self.anchors)).astype(float)
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (len(A),):
                raise OptimizerError("one weight per anchor required")
            if np.any(w < 0) or abs(math.fsum(w) - 1.0) > 1e-12:
                raise OptimizerError("weights must be nonnegative and sum to 1")
            object.__setattr__(self, "anchors", A)
            object.__setattr__(self, "weights", w)
        elif self.kind == "custom":
            if self.value_fn is None or self.grad_fn is None:
                raise OptimizerError("custom objectives need value and gradient oracles")
        else:
            raise OptimizerError(f"unknown objective kind {self.kind!r}")

    @classmethod
    def half_sq_dist(cls, space, anchor):
        return cls("half_sq_dist", space, anchors=np.atleast_2d(anchor), weights=np.ones(1))

    @classmethod
    def frechet(cls, space, anchors, weights=None):
        anchors = np.atleast_2d(anchors)
        if weights is None:
            weights = np.full(len(anchors), 1.0 / len(anchors))
        return cls("frechet", space, anchors=anchors, weights=weights)

    @classmethod
    def custom(cls, space, value, grad):
        return cls("custom", space, value_fn=value, grad_fn=grad)

    def value(self, y) -> float:
        if self.kind == "custom":
            return float(self.value_fn(y))
        d = np.atleast_1d(self.space.dist(self.anchors, y))
        return 0.5 * float(np.dot(self.weights, d * d))

    def grad(self, y) -> np.ndarray:
        """Riemannian gradient; for ``1/2 d(., a)^2`` it is ``-log_y(a)``."""
        if self.kind == "custom":
            return np.asarray(self.grad_fn(y), dtype=float)
        return -(self.weights @ self.space.log(y, self.anchors))

    def to_dict(self) -> dict:
        if self.kind == "custom":
            return {"kind": "custom"}
        d = {"kind": self.kind, "anchors": self.anchors.tolist()}
        if self.kind == "frechet":
            d["weights"] = self.weights.tolist()
        return d


@dataclass(frozen=True)
class ResolventSpec:
    objective: Objective
    lam: float = 1.0
    inner: str = "numeric"
    max_iter: int = 10_000
    tol: float = 1e-10

    def __post_init__(self):
        if self.lam <= 0:
            raise OptimizerError("lambda must be positive")
        if self.inner not in ("numeric", "closed_form"):
            raise OptimizerError(f"unknown inner solver {self.inner!r}")
        if self.inner == "closed_form" and self.objective.kind != "half_sq_dist":
            raise OptimizerError("closed form resolvent exists only for half_sq_dist")


def _require_nonpositive(space):
    if space.curvature > 0:
        raise GeometryError("resolvents are only supported on spaces with kappa <= 0")


def resolvent_closed_form(space: ModelSpace, x, a, lam: float) -> np.ndarray:
    """Resolvent of ``1/2 d(., a)^2``: the point ``lam/(1+lam)`` of the way from ``x`` to ``a``."""
    _require_nonpositive(space)
    if lam <= 0:
        raise OptimizerError("lambda must be positive")
    return space.combine(x, a, lam / (1.0 + lam))


def resolvent_numeric(spec: ResolventSpec, x, init=None, return_info=False):
    """Minimize ``f(y) + d(x, y)^2 / (2 lam)`` by Riemannian gradient descent.

    Fixed step ``1 / (1 + 1/lam)``, halved until the objective does not
    increase. Stops when the gradient norm drops to ``spec.tol``.

    Raises
    ------
    ResolventError
        If ``spec.max_iter`` iterations pass without reaching the tolerance.
    """
    obj, lam = spec.objective, spec.lam
    sp = obj.space
    _require_nonpositive(sp)
    x = sp._check(x)
    y = np.array(x if init is None else sp._check(init), dtype=float)

    def phi(p):
        d = sp.dist(x, p)
        return obj.value(p) + d * d / (2.0 * lam)

    def grad(p):
        return obj.grad(p) - sp.log(p, x) / lam

    base_step = 1.0 / (1.0 + 1.0 / lam)
    val = phi(y)
    g = grad(y)
    gn = sp.norm(y, g)
    for it in range(spec.max_iter):
        if gn <= spec.tol:
            return (y, {"iterations": it, "grad_norm": gn}) if return_info else y
        step = base_step
        for _ in range(60):
            trial = sp.exp(y, -step * g)
            tval = phi(trial)
            if tval <= val + 1e-15 * (1.0 + abs(val)):
                break
            step *= 0.5
        else:
            raise ResolventError("line search failed", grad_norm=gn, point=y)
        tg = grad(trial)
        tgn = sp.norm(trial, tg)
        if tval >= val and tgn >= gn:
            # no measurable progress left in either the value or the gradient
            raise ResolventError(f"stalled at gradient norm {gn:.3g}", grad_norm=gn, point=y)
        y, val, g, gn = trial, tval, tg, tgn
    raise ResolventError(
        f"no convergence in {spec.max_iter} iterations (gradient norm {gn:.3g})",
        grad_norm=gn, point=y,
    )


def resolvent(spec: ResolventSpec, x, init=None) -> np.ndarray:
    if spec.inner == "closed_form":
        return resolvent_closed_form(spec.objective.space, x, spec.objective.anchors[0], spec.lam)
    return resolvent_numeric(spec, x, init=init)


@dataclass
class OptRun:
    trace: Trace
    final: np.ndarray
    objective_values: list = field(default_factory=list)
    dist_to_oracle: list | None = None
    converged: bool | None = None

    def to_csv(self, path) -> Path:
        path = Path(path)
        dto = self.dist_to_oracle or [None] * len(self.objective_values)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "residual", "objective", "dist_to_oracle"])
            for k, r, f, d in zip(self.trace.n, self.trace.residual, self.objective_values, dto):
                w.writerow([k, fmt(r), fmt(f), fmt(d)])
        return path

    def summary(self) -> dict:
        return {
            "final_point": [float(v) for v in self.final],
            "steps": len(self.trace) - 1,
            "converged": self.converged,
            "method": self.trace.meta.get("method"),
        }

    def write_summary(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return path


def hyperbolic_halpern_gd(spec: ResolventSpec, u, x0, schedule: Schedule | None = None,
                          horizon: int = 1000, oracle=None, tol: float | None = None) -> OptRun:
    """Anchored resolvent iteration ``x_{k+1} = a_{k+1} u (+) (1 - a_{k+1}) J(x_k)``.

    Residual rows hold ``d(x_k, J(x_k))``; ``oracle`` (a known minimizer)
    fills ``dist_to_fix``. ``tol``, if given, marks the run converged once
    the final distance to the oracle is within it.
    """
    sp = spec.objective.space
    _require_nonpositive(sp)
    schedule = schedule if schedule is not None else Schedule.harmonic()
    alpha = schedule.take(horizon)
    if np.any((alpha <= 0) | (alpha >= 1)):
        raise OptimizerError("anchor weights must lie in (0, 1)")
    u = np.array(sp._check(u), dtype=float)
    x = np.array(sp._check(x0), dtype=float)
    tr = Trace(space=sp, meta={
        "method": "halpern_gd", "lambda": spec.lam, "schedule": schedule.to_dict(),
        "horizon": horizon, "objective": spec.objective.to_dict(), "space": sp.to_dict(),
    })
    fvals, dto = [], [] if oracle is not None else None
    Jx = resolvent(spec, x)
    prev = x
    for k in range(horizon + 1):
        tr.n.append(k)
        tr.residual.append(sp.dist(x, Jx))
        tr.step_dist.append(sp.dist(x, prev))
        tr.lam.append(None if k == 0 else float(alpha[k - 1]))
        d_or = None if oracle is None else sp.dist(x, oracle)
        tr.dist_to_fix.append(d_or)
        fvals.append(spec.objective.value(x))
        if dto is not None:
            dto.append(d_or)
        if k == horizon:
            break
        prev = x
        x = sp.combine(u, Jx, 1.0 - float(alpha[k]))
        Jx = resolvent(spec, x, init=Jx)
    tr.final = x
    conv = None if (oracle is None or tol is None) else bool(dto[-1] <= tol)
    return OptRun(trace=tr, final=x, objective_values=fvals, dist_to_oracle=dto, converged=conv)


def rsgd_run(obj: Objective, x0, step=0.5, horizon: int = 1000, oracle=None,
             tol: float | None = None) -> OptRun:
    """Deterministic Riemannian gradient descent ``x_{k+1} = exp_{x_k}(-eta_k grad f(x_k))``.

    ``step`` is a constant or a :class:`Schedule`. Residual rows hold the
    gradient norm.
    """
    sp = obj.space
    if isinstance(step, Schedule):
        steps = step.take(horizon)
        step_meta = step.to_dict()
    else:
        if step <= 0:
            raise OptimizerError("step must be positive")
        steps = np.full(horizon, float(step))
        step_meta = float(step)
    if np.any(steps <= 0):
        raise OptimizerError("step must be positive")
    x = np.array(sp._check(x0), dtype=float)
    tr = Trace(space=sp, meta={"method": "rsgd", "step": step_meta, "horizon": horizon,
                               "objective": obj.to_dict(), "residual": "grad_norm",
                               "space": sp.to_dict()})
    fvals, dto = [], [] if oracle is not None else None
    prev = x
    for k in range(horizon + 1):
        g = obj.grad(x)
        tr.n.append(k)
        tr.residual.append(sp.norm(x, g))
        tr.step_dist.append(sp.dist(x, prev))
        tr.lam.append(None if k == 0 else float(steps[k - 1]))
        d_or = None if oracle is None else sp.dist(x, oracle)
        tr.dist_to_fix.append(d_or)
        fvals.append(obj.value(x))
        if dto is not None:
            dto.append(d_or)
        if k == horizon:
            break
        prev = x
        x = sp.exp(x, -steps[k] * g)
    tr.final = x
    conv = None if (oracle is None or tol is None) else bool(dto[-1] <= tol)
    return OptRun(trace=tr, final=x, objective_values=fvals, dist_to_oracle=dto, converged=conv)


def frechet_oracle(obj: Objective, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Weighted Fréchet mean by gradient descent with backtracking.

    Starts from the anchor with the largest weight, takes unit steps (exact
    for a single anchor) and halves them whenever the objective increases.
    """
    if obj.kind not in ("frechet", "half_sq_dist"):
        raise OptimizerError("frechet_oracle needs a Fréchet objective")
    sp = obj.space
    _require_nonpositive(sp)
    if len(obj.anchors) == 1:
        return obj.anchors[0].copy()
    y = obj.anchors[int(np.argmax(obj.weights))].copy()
    val = obj.value(y)
    g = obj.grad(y)
    gn = sp.norm(y, g)
    for _ in range(max_iter):
        if gn <= tol:
            return y
        step = 1.0
        while step >= 1e-8:
            trial = sp.exp(y, -step * g)
            tval = obj.value(trial)
            tg = obj.grad(trial)
            tgn = sp.norm(trial, tg)
            # once value changes are at roundoff level, judge by the gradient
            flat = abs(tval - val) <= 1e-14 * (1.0 + abs(val))
            if tval < val and not flat or flat and tgn < gn:
                break
            step *= 0.5
        else:
            break
        y, val, g, gn = trial, tval, tg, tgn
    raise OptimizerError(f"Fréchet oracle did not reach gradient norm {tol:g} (at {gn:.3g})")
