"""Drivers for the Picard, Krasnosel'skii-Mann, Halpern and viscosity iterations.

Every driver returns a :class:`Trace` with one row per iterate
``x_0, ..., x_horizon``. Row ``n`` holds the residual ``d(x_n, T x_n)``,
the step ``d(x_n, x_{n-1})`` and, when a fixed point is supplied, the
distance to it.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .schedules import Schedule

__all__ = [
    "ANCHOR_WEIGHT_LAMBDA",
    "ANCHOR_WEIGHT_ONE_MINUS_LAMBDA",
    "IterationError",
    "IterationConfig",
    "Trace",
    "km_run",
    "halpern_run",
    "viscosity_run",
    "picard_run",
    "fmt",
]

ANCHOR_WEIGHT_LAMBDA = "anchor_weight_lambda"
ANCHOR_WEIGHT_ONE_MINUS_LAMBDA = "anchor_weight_one_minus_lambda"
CONVENTIONS = (ANCHOR_WEIGHT_LAMBDA, ANCHOR_WEIGHT_ONE_MINUS_LAMBDA)


class IterationError(ValueError):
    pass


def fmt(v) -> str:
    """17 significant digits; empty for missing values."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{float(v):.17g}"


@dataclass
class IterationConfig:
    x0: np.ndarray
    horizon: int
    schedule: Schedule | None = None
    anchor: np.ndarray | None = None
    contraction: object | None = None
    convention: str = ANCHOR_WEIGHT_LAMBDA
    fixed_point: np.ndarray | None = None
    keep_iterates: bool = False
    seed: int | None = None

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise IterationError(f"unknown Halpern convention {self.convention!r}")
        if self.horizon < 0:
            raise IterationError("horizon must be nonnegative")


@dataclass
class Trace:
    n: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    step_dist: list = field(default_factory=list)
    dist_to_fix: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    iterates: list | None = None
    images: list | None = None
    meta: dict = field(default_factory=dict)
    space: object = field(default=None, repr=False)
    final: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.n)

    def record(self, n, x, Tx, step, lam, dfix, keep):
        self.n.append(n)
        self.residual.append(self.space.dist(x, Tx))
        self.step_dist.append(step)
        self.dist_to_fix.append(dfix)
        self.lam.append(lam)
        if keep:
            self.iterates.append(np.array(x))
            self.images.append(np.array(Tx))

    def as_arrays(self) -> dict:
        return {
            "n": np.asarray(self.n),
            "residual": np.asarray(self.residual, dtype=float),
            "step_dist": np.asarray(self.step_dist, dtype=float),
            "dist_to_fix": np.asarray(
                [np.nan if v is None else v for v in self.dist_to_fix], dtype=float
            ),
            "lambda": np.asarray([np.nan if v is None else v for v in self.lam], dtype=float),
        }

    def rows(self):
        return zip(self.n, self.residual, self.step_dist, self.dist_to_fix, self.lam)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "residual", "step_dist", "dist_to_fix", "lambda"])
            for n, r, s, d, lam in self.rows():
                w.writerow([n, fmt(r), fmt(s), fmt(d), fmt(lam)])
        return path

    def write_meta(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")
        return path


def _new_trace(space, cfg, **meta):
    t = Trace(meta=dict(meta), space=space)
    if cfg.keep_iterates:
        t.iterates, t.images = [], []
    t.meta.setdefault("horizon", cfg.horizon)
    t.meta["seed"] = cfg.seed
    if cfg.schedule is not None:
        t.meta.setdefault("schedule", cfg.schedule.to_dict())
    if hasattr(space, "to_dict"):
        t.meta["space"] = space.to_dict()
    return t


def _dfix(space, x, fix):
    return None if fix is None else space.dist(x, fix)


def _coeffs(schedule, horizon, name):
    if schedule is None:
        raise IterationError(f"{name} needs a schedule")
    lam = schedule.take(horizon)
    if np.any((lam < 0) | (lam > 1)):
        raise IterationError("schedule values must lie in [0, 1]")
    return lam


def _x0(space, x0):
    x0 = space._check(x0)
    return np.array(x0, dtype=float)


def km_run(T, cfg: IterationConfig) -> Trace:
    """Krasnosel'skii-Mann: ``x_{n+1} = (1 - l_{n+1}) x_n (+) l_{n+1} T x_n``."""
    sp = T.space
    lam = _coeffs(cfg.schedule, cfg.horizon, "km_run")
    tr = _new_trace(sp, cfg, method="km", operator=T.to_dict())
    x = _x0(sp, cfg.x0)
    Tx = T(x)
    tr.record(0, x, Tx, 0.0, None, _dfix(sp, x, cfg.fixed_point), cfg.keep_iterates)
    for n in range(cfg.horizon):
        l = float(lam[n])
        nxt = sp.combine(x, Tx, l)
        step = sp.dist(nxt, x)
        x = nxt
        Tx = T(x)
        tr.record(n + 1, x, Tx, step, l, _dfix(sp, x, cfg.fixed_point), cfg.keep_iterates)
    tr.final = x
    return tr


def halpern_run(T, cfg: IterationConfig) -> Trace:
    """Halpern iteration anchored at ``cfg.anchor``.

    With ``anchor_weight_lambda`` the update is
    ``z_{n+1} = l_{n+1} u (+) (1 - l_{n+1}) T z_n``; the other convention
    puts ``l_{n+1}`` on ``T z_n`` instead.
    """
    if cfg.anchor is None:
        raise IterationError("halpern_run needs an anchor")
    sp = T.space
    lam = _coeffs(cfg.schedule, cfg.horizon, "halpern_run")
    u = _x0(sp, cfg.anchor)
    tr = _new_trace(
        sp, cfg, method="halpern", operator=T.to_dict(), convention=cfg.convention
    )
    on_T = cfg.convention == ANCHOR_WEIGHT_ONE_MINUS_LAMBDA
    z = _x0(sp, cfg.x0)
    Tz = T(z)
    tr.record(0, z, Tz, 0.0, None, _dfix(sp, z, cfg.fixed_point), cfg.keep_iterates)
    for n in range(cfg.horizon):
        l = float(lam[n])
        nxt = sp.combine(u, Tz, l if on_T else 1.0 - l)
        step = sp.dist(nxt, z)
        z = nxt
        Tz = T(z)
        tr.record(n + 1, z, Tz, step, l, _dfix(sp, z, cfg.fixed_point), cfg.keep_iterates)
    tr.final = z
    return tr


def viscosity_run(T, cfg: IterationConfig) -> Trace:
    """``x_{k+1} = a_{k+1} f(x_k) (+) (1 - a_{k+1}) T x_k`` with a contraction ``f``.

    Defaults to ``a_k = min(2 / ((1 - beta) k), 1)`` when no schedule is set.
    """
    f = cfg.contraction
    if f is None:
        raise IterationError("viscosity_run needs a contraction")
    beta = f.lipschitz
    if beta is None or not 0.0 <= beta < 1.0:
        raise IterationError(f"contraction factor must lie in [0, 1), got {beta}")
    schedule = cfg.schedule if cfg.schedule is not None else Schedule.viscosity(beta)
    sp = T.space
    alpha = _coeffs(schedule, cfg.horizon, "viscosity_run")
    tr = _new_trace(
        sp, cfg, method="viscosity", operator=T.to_dict(), contraction=f.to_dict(),
        schedule=schedule.to_dict(),
    )
    tr.meta["beta"] = beta
    x = _x0(sp, cfg.x0)
    Tx = T(x)
    tr.record(0, x, Tx, 0.0, None, _dfix(sp, x, cfg.fixed_point), cfg.keep_iterates)
    for k in range(cfg.horizon):
        a = float(alpha[k])
        nxt = sp.combine(f(x), Tx, 1.0 - a)
        step = sp.dist(nxt, x)
        x = nxt
        Tx = T(x)
        tr.record(k + 1, x, Tx, step, a, _dfix(sp, x, cfg.fixed_point), cfg.keep_iterates)
    tr.final = x
    return tr


def picard_run(T, x0, horizon: int, fixed_point=None, keep_iterates=False) -> Trace:
    """Plain ``x_{n+1} = T x_n``."""
    cfg = IterationConfig(x0=x0, horizon=horizon, fixed_point=fixed_point,
                          keep_iterates=keep_iterates)
    sp = T.space
    tr = _new_trace(sp, cfg, method="picard", operator=T.to_dict())
    x = _x0(sp, x0)
    Tx = T(x)
    tr.record(0, x, Tx, 0.0, None, _dfix(sp, x, fixed_point), keep_iterates)
    for n in range(horizon):
        step = sp.dist(Tx, x)
        x = Tx
        Tx = T(x)
        tr.record(n + 1, x, Tx, step, None, _dfix(sp, x, fixed_point), keep_iterates)
    tr.final = x
    return tr
