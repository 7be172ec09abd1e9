"""Asymptotic-regularity bounds and checkers for the iteration traces.

Covers the KM bound ``diam / sqrt(pi * sum l_i (1 - l_i))`` together with
the weight/recursion machinery behind it (``pi^n_k``, ``c_{m,n}``, ``P_n``),
the O(1/k) viscosity bounds, the Lieder and Sabach-Shtern Halpern bounds and
the two sharpness witnesses (right shift on l^1, rotation family in R^2).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import ModelSpace
from .iteration import (
    ANCHOR_WEIGHT_LAMBDA,
    ANCHOR_WEIGHT_ONE_MINUS_LAMBDA,
    IterationConfig,
    Trace,
    fmt,
    halpern_run,
    km_run,
)
from .operators import PlanarRotation, RightShift, SequenceSpace
from .schedules import Schedule

__all__ = [
    "BoundError",
    "BoundReport",
    "PiWeights",
    "CTable",
    "PnReport",
    "ViscosityConstants",
    "ViscosityReport",
    "SharpnessReport",
    "km_bound",
    "pi_weights",
    "c_table",
    "p_n_report",
    "visc_constants",
    "visc_bound_report",
    "literature_bounds",
    "check_km_trace",
    "check_c_recursion",
    "representation_rhs",
    "sharpness_suite",
    "C_TABLE_LIMIT",
]

C_TABLE_LIMIT = 60
DEFAULT_TOL = 1e-9
INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


class BoundError(ValueError):
    pass


@dataclass
class BoundReport:
    """Observed quantity vs. theoretical bound, row by row."""

    n: np.ndarray
    observed: np.ndarray
    bound: np.ndarray
    tol: float = DEFAULT_TOL
    label: str = ""
    note: str = ""

    def __post_init__(self):
        self.n = np.asarray(self.n)
        self.observed = np.asarray(self.observed, dtype=float)
        self.bound = np.asarray(self.bound, dtype=float)

    @property
    def margin(self) -> np.ndarray:
        return self.bound - self.observed

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margin)) if len(self.n) else math.inf

    @property
    def violated(self) -> bool:
        return bool(len(self.n) and self.worst_margin < -self.tol)

    def summary(self) -> dict:
        return {
            "label": self.label,
            "violated": self.violated,
            "worst_margin": self.worst_margin,
            "rows": int(len(self.n)),
            "tol": self.tol,
            "note": self.note,
        }

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "observed", "bound", "margin"])
            for n, o, b, m in zip(self.n, self.observed, self.bound, self.margin):
                w.writerow([int(n), fmt(o), fmt(b), fmt(m)])
        return path


# -- KM bound -------------------------------------------------------------

def km_bound(s: Schedule, diam: float, n: int) -> float:
    """``diam / sqrt(pi * sum_{i<=n} l_i (1 - l_i))``."""
    if n < 1:
        raise BoundError("the KM bound is stated for n >= 1")
    lam = s.take(n)
    tot = math.fsum(lam * (1.0 - lam))
    if tot <= 0.0:
        raise BoundError("sum of l_i (1 - l_i) vanishes; bound undefined")
    return diam / math.sqrt(math.pi * tot)


def _km_bounds(s: Schedule, diam: float, N: int) -> np.ndarray:
    lam = s.take(N)
    cum = np.cumsum(lam * (1.0 - lam))
    with np.errstate(divide="ignore"):
        return diam / np.sqrt(math.pi * cum)


def check_km_trace(trace: Trace, s: Schedule, diam: float, tol: float = DEFAULT_TOL) -> BoundReport:
    """``d(x_n, T x_n) <= km_bound(s, diam, n)`` for every row ``n >= 1``."""
    res = np.asarray(trace.residual[1:], dtype=float)
    N = len(res)
    return BoundReport(
        n=np.arange(1, N + 1), observed=res, bound=_km_bounds(s, diam, N), tol=tol,
        label="km_bound",
    )


# -- pi weights and the c recursion ---------------------------------------

@dataclass
class PiWeights:
    """``pi^n_k = l_k prod_{j=k+1}^n (1 - l_j)`` for ``k = 0..n`` with ``l_0 = 1``."""

    n: int
    values: np.ndarray

    @property
    def total(self) -> float:
        return math.fsum(self.values)


def _lambdas0(s: Schedule, n: int) -> np.ndarray:
    return np.concatenate([[1.0], s.take(n)])


def _weights(lam0: np.ndarray, n: int) -> np.ndarray:
    # suffix products of (1 - l_j) for j = k+1..n
    one_minus = 1.0 - lam0[1 : n + 1]
    tail = np.ones(n + 1)
    if n:
        tail[:-1] = np.cumprod(one_minus[::-1])[::-1]
    return lam0[: n + 1] * tail


def pi_weights(s: Schedule, n: int) -> PiWeights:
    if n < 0:
        raise BoundError("n must be nonnegative")
    return PiWeights(n, _weights(_lambdas0(s, n), n))


@dataclass
class CTable:
    """``c_{m,n}`` for ``-1 <= m < n <= N``; ``c_{-1,n} = 1``."""

    N: int
    schedule: Schedule
    table: np.ndarray = field(repr=False)

    def __getitem__(self, mn) -> float:
        m, n = mn
        if not -1 <= m < n <= self.N:
            raise IndexError(f"c_{{{m},{n}}} outside the table (N={self.N})")
        return float(self.table[m + 1, n])


def c_table(s: Schedule, N: int, limit: int = C_TABLE_LIMIT) -> CTable:
    """Fill ``c_{m,n} = sum_j sum_k pi^m_j pi^n_k c_{j-1,k-1}`` in increasing ``n``.

    Inner sums over ``k`` are shared across ``m`` through suffix sums, giving
    O(N^3) work instead of O(N^4).
    """
    if N > limit:
        raise BoundError(f"N={N} exceeds the c-table limit {limit}")
    if N < 1:
        raise BoundError("N must be >= 1")
    lam0 = _lambdas0(s, N)
    W = [_weights(lam0, n) for n in range(N + 1)]
    # table[m + 1, n]
    C = np.full((N + 1, N + 1), np.nan)
    C[0, :] = 1.0
    for n in range(1, N + 1):
        # B[j, k] = c_{j-1, k-1} for j = 0..n-1, k = 1..n (only j < k is read)
        B = np.zeros((n, n + 1))
        for j in range(n):
            B[j, j + 1 :] = C[j, j : n]
        M = B * W[n][None, :]
        suffix = np.cumsum(M[:, ::-1], axis=1)[:, ::-1]
        for m in range(n):
            C[m + 1, n] = float(np.dot(W[m], suffix[: m + 1, m + 1]))
    return CTable(N=N, schedule=s, table=C)


@dataclass
class PnReport:
    n: np.ndarray
    P: np.ndarray
    sums: np.ndarray
    products: np.ndarray
    bound: float = INV_SQRT_PI

    def report(self, tol: float = 1e-10) -> BoundReport:
        return BoundReport(self.n, self.products, np.full(len(self.n), self.bound), tol=tol,
                           label="probabilistic")


def p_n_report(s: Schedule, N: int, table: CTable | None = None) -> PnReport:
    """``P_n = c_{n,n+1} / l_{n+1}`` for ``n = 0..N-1`` and ``sqrt(sum_{i<=n} l_i(1-l_i)) P_n``."""
    table = table if table is not None else c_table(s, N)
    lam = s.take(N)
    P = np.array([table[n, n + 1] / lam[n] for n in range(N)])
    sums = np.concatenate([[0.0], np.cumsum(lam * (1.0 - lam))])[:N]
    return PnReport(n=np.arange(N), P=P, sums=sums, products=np.sqrt(sums) * P)


def check_c_recursion(trace: Trace, s: Schedule, diam: float, table: CTable | None = None,
                      tol: float = DEFAULT_TOL) -> dict:
    """Compare normalized pairwise distances with ``c_{m,n}`` and residuals with ``P_n``.

    Needs a trace recorded with ``keep_iterates``. Distances are divided by
    ``diam`` so the unit-diameter recursion applies.
    """
    if trace.iterates is None:
        raise BoundError("check_c_recursion needs stored iterates")
    N = len(trace.iterates) - 1
    table = table if table is not None else c_table(s, N)
    sp = trace.space
    X = np.asarray(trace.iterates)
    mm, nn, obs, bnd = [], [], [], []
    for n in range(1, N + 1):
        d = np.atleast_1d(sp.dist(X[:n], X[n])) / diam
        for m in range(n):
            mm.append(m)
            nn.append(n)
            obs.append(d[m])
            bnd.append(table[m, n])
    pairs = BoundReport(np.array(nn), np.array(obs), np.array(bnd), tol=tol, label="c_mn",
                        note="rows are (m, n) pairs flattened; n column holds n")
    pairs.m = np.array(mm)
    pn = p_n_report(s, N, table)
    res = np.asarray(trace.residual[:N], dtype=float) / diam
    resid = BoundReport(pn.n, res, pn.P, tol=tol, label="P_n")
    return {"pairs": pairs, "residual": resid, "probabilistic": pn.report()}


def representation_rhs(trace: Trace, s: Schedule, m: int, q) -> float:
    """``sum_{j=0}^m pi^m_j d(T x_{j-1}, q)`` with ``T x_{-1} := x_0``."""
    if trace.iterates is None:
        raise BoundError("representation_rhs needs stored iterates")
    sp = trace.space
    w = pi_weights(s, m).values
    pts = [trace.iterates[0]] + list(trace.images[:m])
    return math.fsum(w[j] * sp.dist(pts[j], q) for j in range(m + 1))


# -- viscosity ------------------------------------------------------------

@dataclass
class ViscosityConstants:
    beta: float
    gamma: float
    J: int
    C_xbar: float
    d0: float
    dz: float

    def recompute(self) -> float:
        return max(self.d0, self.dz / (1.0 - self.beta))

    def step_bound(self, k):
        return 2.0 * self.J * self.C_xbar / ((1.0 - self.beta) * np.asarray(k, dtype=float))

    def residual_bound(self, k):
        return 2.0 * self.C_xbar * (self.J + 2) / ((1.0 - self.beta) * np.asarray(k, dtype=float))


def visc_constants(space, x0, xbar, f, beta: float) -> ViscosityConstants:
    """``gamma = 1 - beta``, ``J = ceil(2 / gamma)``,
    ``C = max(d(x0, xbar), d(f(xbar), xbar) / (1 - beta))``.

    ``xbar`` must be a fixed point of the nonexpansive map the constants
    are used with; that is the caller's responsibility.
    """
    if not 0.0 <= beta < 1.0:
        raise BoundError(f"beta must lie in [0, 1), got {beta}")
    gamma = 1.0 - beta
    # round away representation noise such as 2 / 0.1 = 20.000000000000004
    J = math.ceil(round(2.0 / gamma, 9))
    d0 = space.dist(x0, xbar)
    dz = space.dist(f(xbar), xbar)
    return ViscosityConstants(beta, gamma, J, max(d0, dz / gamma), d0, dz)


@dataclass
class ViscosityReport:
    step: BoundReport
    residual: BoundReport

    @property
    def violated(self) -> bool:
        return self.step.violated or self.residual.violated

    @property
    def worst_margin(self) -> float:
        return min(self.step.worst_margin, self.residual.worst_margin)

    def summary(self) -> dict:
        return {"violated": self.violated, "worst_margin": self.worst_margin,
                "step": self.step.summary(), "residual": self.residual.summary()}


def visc_bound_report(trace: Trace, consts: ViscosityConstants,
                      tol: float = DEFAULT_TOL) -> ViscosityReport:
    """Check both O(1/k) bounds on a viscosity trace.

    Step rows: ``d(x_k, x_{k-1})`` at row ``k``. Residual rows: the residual
    stored at row ``k - 1``, i.e. ``d(T x_{k-1}, x_{k-1})``, against the bound
    with index ``k``.
    """
    expected = Schedule.viscosity(consts.beta).to_dict()
    if trace.meta.get("method") != "viscosity" or trace.meta.get("schedule") != expected:
        raise BoundError("trace was not produced with a_k = min(2/((1-beta)k), 1)")
    H = len(trace) - 1
    k = np.arange(1, H + 1)
    step = BoundReport(k, np.asarray(trace.step_dist[1:]), consts.step_bound(k), tol=tol,
                       label="visc_step")
    resid = BoundReport(k, np.asarray(trace.residual[:H]), consts.residual_bound(k), tol=tol,
                        label="visc_residual",
                        note="observed = residual at trace row k-1, bound index k")
    return ViscosityReport(step, resid)


# -- literature -----------------------------------------------------------

def literature_bounds(kind: str, k: int, dist0: float) -> float:
    """Halpern bounds ``c * dist0 / (k + 1)``: Lieder ``c = 2``, Sabach-Shtern ``c = 4``."""
    consts = {"lieder": 2.0, "sabach": 4.0}
    if kind not in consts:
        raise BoundError(f"unknown literature bound {kind!r}")
    if k < 0 or dist0 < 0:
        raise BoundError("k and dist0 must be nonnegative")
    return consts[kind] * dist0 / (k + 1)


# -- sharpness witnesses --------------------------------------------------

@dataclass
class SharpnessReport:
    shift_n: np.ndarray
    shift_residual: np.ndarray
    shift_lower: np.ndarray
    rot_n: np.ndarray
    rot_expected: np.ndarray
    rot_residual: dict
    rot_tol: float = 1e-9
    shift_tol: float = 1e-12

    @property
    def shift_ok(self) -> bool:
        return bool(np.all(self.shift_residual >= self.shift_lower - self.shift_tol))

    def rot_matches(self, convention) -> np.ndarray:
        return np.abs(self.rot_residual[convention] - self.rot_expected) <= self.rot_tol

    @property
    def match_counts(self) -> np.ndarray:
        return sum(self.rot_matches(c).astype(int) for c in self.rot_residual)

    @property
    def convention_selected(self) -> str | None:
        """The convention matching ``2/(n+1)`` at every ``n``, if exactly one does."""
        full = [c for c in self.rot_residual if np.all(self.rot_matches(c))]
        return full[0] if len(full) == 1 else None

    @property
    def ambiguous_n(self) -> list:
        """Horizons where both conventions reproduce ``2/(n+1)``."""
        return [int(n) for n, c in zip(self.rot_n, self.match_counts) if c > 1]

    @property
    def exactly_one_everywhere(self) -> bool:
        return bool(np.all(self.match_counts == 1))

    def summary(self) -> dict:
        return {
            "shift_ok": self.shift_ok,
            "shift_worst_margin": float(np.min(self.shift_residual - self.shift_lower)),
            "convention_selected": self.convention_selected,
            "exactly_one_everywhere": self.exactly_one_everywhere,
            "ambiguous_n": self.ambiguous_n,
            "rotation_worst_error": {
                c: float(np.max(np.abs(r - self.rot_expected))) for c, r in self.rot_residual.items()
            },
        }


def rotation_residual(n: int, convention: str) -> float:
    """Residual after ``n`` Halpern steps with ``T`` the rotation by ``pi/(n+1)``."""
    E2 = ModelSpace(0, 2)
    T = PlanarRotation(E2, math.pi / (n + 1))
    x0 = np.array([1.0, 0.0])
    cfg = IterationConfig(x0=x0, anchor=x0, horizon=n, schedule=Schedule.km_ratio(),
                          convention=convention)
    return halpern_run(T, cfg).residual[-1]


def sharpness_suite(shift_horizon: int = 500, rot_horizon: int = 200) -> SharpnessReport:
    """Run both sharpness witnesses.

    (a) KM with ``l = 1/2`` on the right shift from ``e_1``: residual should
    stay above ``1/sqrt(n+1)``. (b) For each ``n``, Halpern on the rotation
    by ``pi/(n+1)`` with ``l_k = k/(k+1)`` and ``u = x_0 = (1, 0)`` under both
    anchor conventions, compared with ``2/(n+1)``.
    """
    seq = SequenceSpace(shift_horizon + 2)
    tr = km_run(RightShift(seq), IterationConfig(x0=seq.unit(0), horizon=shift_horizon,
                                                 schedule=Schedule.constant(0.5)))
    sn = np.arange(shift_horizon + 1)
    rn = np.arange(1, rot_horizon + 1)
    rot = {
        c: np.array([rotation_residual(int(n), c) for n in rn])
        for c in (ANCHOR_WEIGHT_LAMBDA, ANCHOR_WEIGHT_ONE_MINUS_LAMBDA)
    }
    return SharpnessReport(
        shift_n=sn, shift_residual=np.asarray(tr.residual), shift_lower=1.0 / np.sqrt(sn + 1.0),
        rot_n=rn, rot_expected=2.0 / (rn + 1.0), rot_residual=rot,
    )


def write_summary(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n")
    return path
