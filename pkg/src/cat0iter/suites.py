"""Seeded verification suites bundling the library's invariants.

Each suite returns a list of :class:`CheckResult`. A margin is
``allowed - observed``; a negative worst margin means a violation.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import ModelSpace, comparison_triangle
from .iteration import IterationConfig, km_run, viscosity_run
from .operators import (
    EllipticRotation,
    ForwardOperator,
    GeodesicContraction,
    Identity,
    PlanarRotation,
    RightShift,
    SequenceSpace,
    check_nonexpansive,
)
from .optimizer import (
    Objective,
    ResolventSpec,
    frechet_oracle,
    hyperbolic_halpern_gd,
    resolvent_closed_form,
    resolvent_numeric,
    rsgd_run,
)
from .rates import (
    INV_SQRT_PI,
    c_table,
    check_c_recursion,
    check_km_trace,
    representation_rhs,
    sharpness_suite,
    visc_bound_report,
    visc_constants,
)
from .schedules import Schedule

__all__ = ["CheckResult", "SUITES", "run_suite", "km_instances"]

DEFAULT_SEED = 20251019


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    seed: int | None = None
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = ""
        if self.detail:
            extra = " " + " ".join(f"{k}={v}" for k, v in self.detail.items())
        return (f"[{status}] {self.name}: worst_margin={self.worst_margin:.3e} "
                f"({self.seconds:.1f}s, seed={self.seed}){extra}")


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def _result(name, margins, seed, t, **detail):
    worst = float(np.min(margins)) if len(margins) else math.inf
    return CheckResult(name, worst >= 0.0, worst, seed, detail, t.seconds)


# -- geometry -------------------------------------------------------------

GEOMETRY_SPACES = (ModelSpace(0, 2), ModelSpace(-1, 2), ModelSpace(-2.0, 3))


def geometry_suite(seed: int = DEFAULT_SEED, samples: int = 1000, radius: float = 2.0):
    rng = np.random.default_rng(seed)
    out = []
    sphere = ModelSpace(1.0, 2)

    with _Timer() as t:
        m = []
        for sp in GEOMETRY_SPACES + (sphere,):
            r = 1.2 if sp.curvature > 0 else radius
            for _ in range(samples):
                x, y = sp.random_point(rng, r), sp.random_point(rng, r)
                t1, t2 = rng.uniform(size=2)
                d = sp.dist(sp.combine(x, y, t1), sp.combine(x, y, t2))
                m.append(1e-8 - abs(d - abs(t1 - t2) * sp.dist(x, y)))
    out.append(_result("geodesic_parameterization", m, seed, t, samples=len(m)))

    with _Timer() as t:
        m = []
        for sp in GEOMETRY_SPACES:
            for _ in range(samples):
                x, y, z = (sp.random_point(rng, radius) for _ in range(3))
                s = rng.uniform()
                lhs = sp.dist(z, sp.combine(x, y, s))
                m.append((1 - s) * sp.dist(z, x) + s * sp.dist(z, y) + 1e-9 - lhs)
    out.append(_result("convexity_condition", m, seed, t, samples=len(m)))

    with _Timer() as t:
        m = []
        for sp in GEOMETRY_SPACES[1:]:
            for _ in range(samples):
                a, b, c, d = (sp.random_point(rng, radius) for _ in range(4))
                s = rng.uniform()
                lhs = sp.dist(sp.combine(a, b, s), sp.combine(c, d, s))
                m.append((1 - s) * sp.dist(a, c) + s * sp.dist(b, d) + 1e-9 - lhs)
    out.append(_result("cat0_two_geodesic_convexity", m, seed, t, samples=len(m)))

    with _Timer() as t:
        m = []
        sides = ((0, 1), (1, 2), (2, 0))
        for sp in GEOMETRY_SPACES[1:]:
            for _ in range(samples):
                P = [sp.random_point(rng, radius) for _ in range(3)]
                tri = comparison_triangle(sp.dist(P[0], P[1]), sp.dist(P[1], P[2]),
                                          sp.dist(P[2], P[0]))
                i1, i2 = rng.choice(3, size=2, replace=False)
                (a1, b1), (a2, b2) = sides[i1], sides[i2]
                s1, s2 = rng.uniform(size=2)
                x = sp.combine(P[a1], P[b1], s1)
                y = sp.combine(P[a2], P[b2], s2)
                xb = tri.point_on_side(a1, b1, s1)
                yb = tri.point_on_side(a2, b2, s2)
                m.append(float(np.linalg.norm(xb - yb)) + 1e-9 - sp.dist(x, y))
    out.append(_result("cat0_comparison_inequality", m, seed, t, samples=len(m)))

    with _Timer() as t:
        m = []
        for sp in GEOMETRY_SPACES + (sphere,):
            r = 1.2 if sp.curvature > 0 else radius
            for _ in range(samples):
                x, y, z = (sp.random_point(rng, r) for _ in range(3))
                m.append(1e-10 - abs(sp.dist(x, y) - sp.dist(y, x)))
                m.append(sp.dist(x, y) + sp.dist(y, z) + 1e-10 - sp.dist(x, z))
                m.append(1e-10 - sp.dist(x, x))
    out.append(_result("metric_axioms", m, seed, t, samples=len(m)))
    return out


# -- operators ------------------------------------------------------------

def operators_suite(seed: int = DEFAULT_SEED, trials: int = 1000):
    rng = np.random.default_rng(seed)
    E2, H2, H3 = ModelSpace(0, 2), ModelSpace(-1, 2), ModelSpace(-1, 3)
    out = []

    def sampler(sp, r):
        return lambda: (sp.random_point(rng, r), sp.random_point(rng, r))

    cases = [
        ("planar_rotation", PlanarRotation(E2, 0.7), sampler(E2, 2.0)),
        ("elliptic_rotation_H2", EllipticRotation(H2, 1.1), sampler(H2, 2.0)),
        ("elliptic_rotation_H3", EllipticRotation(H3, -0.4), sampler(H3, 2.0)),
        ("identity_H2", Identity(H2), sampler(H2, 2.0)),
        ("contraction_E2", GeodesicContraction(E2, E2.random_point(rng, 1.0), 0.5), sampler(E2, 2.0)),
        ("contraction_H2", GeodesicContraction(H2, H2.random_point(rng, 1.0), 0.5), sampler(H2, 2.0)),
    ]
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    L = float(np.max(np.linalg.eigvalsh(Q)))
    cases.append(("forward_quadratic",
                  ForwardOperator(E2, lambda x: Q @ x, 1.5 / L, L), sampler(E2, 2.0)))
    seq = SequenceSpace(12)

    def seq_pair():
        a, b = np.zeros(12), np.zeros(12)
        a[:11], b[:11] = rng.normal(size=11), rng.normal(size=11)
        return a, b

    cases.append(("right_shift", RightShift(seq), seq_pair))
    for name, op, smp in cases:
        with _Timer() as t:
            rep = check_nonexpansive(op, smp, trials=trials, tol=1e-9)
        margin = 1e-9 - rep.max_excess
        if name.startswith("contraction"):
            margin = min(margin, op.beta + 1e-10 - rep.max_ratio)
        out.append(CheckResult(f"nonexpansive[{name}]", rep.passed and margin >= 0, margin,
                               seed, {"max_ratio": round(rep.max_ratio, 12)}, t.seconds))

    with _Timer() as t:
        m = []
        for sp in (H2, H3):
            T = EllipticRotation(sp, 0.9)
            p = sp.base_point()
            m.append(1e-12 - sp.dist(T(p), p))
            for _ in range(200):
                m.append(1e-12 - sp.constraint_residual(T(sp.random_point(rng, 3.0))))
    out.append(_result("elliptic_rotation_fixes_base", m, seed, t))

    with _Timer() as t:
        m = []
        for _ in range(50):
            A = rng.normal(size=(3, 3))
            A = A @ A.T + 0.1 * np.eye(3)
            b = rng.normal(size=3)
            L = float(np.max(np.linalg.eigvalsh(A)))
            F = ForwardOperator(ModelSpace(0, 3), lambda x, A=A, b=b: A @ x - b,
                                rng.uniform(0.1, 1.9) / L, L)
            xstar = np.linalg.solve(A, b)
            m.append(1e-10 - float(np.linalg.norm(F(xstar) - xstar)))
    out.append(_result("forward_fixed_points_are_minimizers", m, seed, t))
    return out


# -- KM rates -------------------------------------------------------------

def km_instances(rng, n_seeds: int):
    """Bounded convex test regions with self-maps: ``(space, K-radius, diam, op, x0, fix)``."""
    E2, H2 = ModelSpace(0, 2), ModelSpace(-1, 2)
    regions = ((E2, 1.0, 2.0), (H2, 0.5, 1.0))
    out = []
    for sp, r, diam in regions:
        for _ in range(n_seeds):
            angle = rng.uniform(0.2, math.pi)
            rot = PlanarRotation(sp, angle) if sp.curvature == 0 else EllipticRotation(sp, angle)
            out.append((sp, r, diam, rot, sp.random_point(rng, r), sp.base_point()))
            c = sp.random_point(rng, r)
            con = GeodesicContraction(sp, c, rng.uniform(0.0, 0.95))
            out.append((sp, r, diam, con, sp.random_point(rng, r), c))
    return out


KM_SCHEDULES = (Schedule.constant(0.1), Schedule.constant(0.5), Schedule.constant(0.9),
                Schedule.harmonic())


def km_rates_suite(seed: int = DEFAULT_SEED, n_seeds: int = 7, horizon: int = 1000):
    rng = np.random.default_rng(seed)
    out = []
    with _Timer() as t:
        m, fejer, count = [], [], 0
        for s in KM_SCHEDULES:
            for sp, r, diam, op, x0, fix in km_instances(rng, n_seeds):
                tr = km_run(op, IterationConfig(x0=x0, horizon=horizon, schedule=s,
                                                fixed_point=fix))
                m.append(check_km_trace(tr, s, diam).worst_margin + 1e-9)
                d = np.asarray(tr.dist_to_fix)
                fejer.append(float(np.min(d[:-1] - d[1:])) + 1e-9)
                count += 1
    out.append(_result("km_bound", m, seed, t, instances=count, horizon=horizon))
    out.append(_result("km_fejer_monotone", fejer, seed, t, instances=count))
    return out


# -- c recursion ----------------------------------------------------------

def c_recursion_suite(seed: int = DEFAULT_SEED, N: int = 50, n_seeds: int = 2):
    rng = np.random.default_rng(seed)
    schedules = [Schedule.constant(v / 10) for v in range(1, 10)] + [Schedule.harmonic()]
    out = []
    with _Timer() as t:
        pairs, resid, prob, rep = [], [], [], []
        for s in schedules:
            table = c_table(s, N)
            for sp, r, diam, op, x0, fix in km_instances(rng, n_seeds):
                tr = km_run(op, IterationConfig(x0=x0, horizon=N, schedule=s, keep_iterates=True))
                chk = check_c_recursion(tr, s, diam, table)
                pairs.append(chk["pairs"].worst_margin + 1e-9)
                resid.append(chk["residual"].worst_margin + 1e-9)
                for _ in range(3):
                    q = sp.random_point(rng, r)
                    for mm in range(21):
                        lhs = sp.dist(tr.iterates[mm], q)
                        rep.append(representation_rhs(tr, s, mm, q) + 1e-9 - lhs)
            prob.append(chk["probabilistic"].worst_margin + 1e-10)
    out.append(_result("c_mn_dominates_distances", pairs, seed, t, N=N))
    out.append(_result("P_n_dominates_residual", resid, seed, t, N=N))
    out.append(_result("probabilistic_inequality", prob, seed, t, bound=round(INV_SQRT_PI, 10)))
    out.append(_result("representation_inequality", rep, seed, t))
    return out


# -- sharpness ------------------------------------------------------------

def sharpness_checks(shift_horizon: int = 500, rot_horizon: int = 200):
    with _Timer() as t:
        rep = sharpness_suite(shift_horizon, rot_horizon)
    summ = rep.summary()
    shift = CheckResult("right_shift_lower_bound", rep.shift_ok,
                        summ["shift_worst_margin"] + 1e-12, None, {"n_max": shift_horizon},
                        t.seconds)
    sel = rep.convention_selected
    err = summ["rotation_worst_error"][sel] if sel else math.inf
    rot = CheckResult("rotation_equality_selected_convention", sel is not None, 1e-9 - err, None,
                      {"convention": sel, "n_max": rot_horizon}, t.seconds)
    one = CheckResult("rotation_exactly_one_convention_per_n", rep.exactly_one_everywhere,
                      0.0 if rep.exactly_one_everywhere else -1.0, None,
                      {"ambiguous_n": rep.ambiguous_n}, t.seconds)
    return [shift, rot, one], rep


def sharpness_suite_checks(seed: int = DEFAULT_SEED):
    return sharpness_checks()[0]


# -- viscosity ------------------------------------------------------------

VISC_BETAS = (0.25, 0.5, 0.75)


def viscosity_suite(seed: int = DEFAULT_SEED, centers: int = 4, horizon: int = 10_000):
    rng = np.random.default_rng(seed)
    H2 = ModelSpace(-1, 2)
    pbar = H2.base_point()
    out = []
    with _Timer() as t:
        step_m, res_m, bnd_m, count = [], [], [], 0
        for beta in VISC_BETAS:
            for _ in range(centers):
                T = EllipticRotation(H2, rng.uniform(0.2, math.pi))
                f = GeodesicContraction(H2, H2.random_point(rng, 2.0), beta)
                x0 = H2.random_point(rng, 2.0)
                tr = viscosity_run(T, IterationConfig(x0=x0, horizon=horizon, contraction=f,
                                                      fixed_point=pbar))
                consts = visc_constants(H2, x0, pbar, f, beta)
                rep = visc_bound_report(tr, consts)
                step_m.append(rep.step.worst_margin + 1e-9)
                res_m.append(rep.residual.worst_margin + 1e-9)
                bnd_m.append(consts.C_xbar + 1e-9 - max(tr.dist_to_fix))
                count += 1
    out.append(_result("visc_step_bound", step_m, seed, t, instances=count, horizon=horizon))
    out.append(_result("visc_residual_bound", res_m, seed, t, instances=count))
    out.append(_result("visc_boundedness", bnd_m, seed, t, instances=count))
    return out


# -- optimizer ------------------------------------------------------------

def resolvent_checks(seed: int = DEFAULT_SEED, pairs: int = 100, lipschitz_trials: int = 1000):
    rng = np.random.default_rng(seed)
    H2 = ModelSpace(-1, 2)
    out = []
    with _Timer() as t:
        m = []
        for lam in (0.1, 1.0, 10.0):
            for _ in range(pairs):
                x, a = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
                spec = ResolventSpec(Objective.half_sq_dist(H2, a), lam)
                m.append(1e-8 - H2.dist(resolvent_numeric(spec, x),
                                        resolvent_closed_form(H2, x, a, lam)))
    out.append(_result("resolvent_closed_form_matches_numeric", m, seed, t, pairs=3 * pairs))

    with _Timer() as t:
        m = []
        a = H2.random_point(rng, 1.5)
        anchors = np.array([H2.random_point(rng, 1.5) for _ in range(3)])
        fre = ResolventSpec(Objective.frechet(H2, anchors), 1.0)
        for i in range(lipschitz_trials):
            x, y = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
            lam = (0.1, 1.0, 10.0)[i % 3]
            Jx, Jy = resolvent_closed_form(H2, x, a, lam), resolvent_closed_form(H2, y, a, lam)
            m.append(H2.dist(x, y) + 1e-8 - H2.dist(Jx, Jy))
            m.append(H2.dist(x, y) + 1e-8 - H2.dist(resolvent_numeric(fre, x),
                                                     resolvent_numeric(fre, y)))
    out.append(_result("resolvent_1_lipschitz", m, seed, t, pairs=lipschitz_trials))

    with _Timer() as t:
        m = []
        for _ in range(10):
            anchors = np.array([H2.random_point(rng, 1.5) for _ in range(5)])
            obj = Objective.frechet(H2, anchors)
            xs = frechet_oracle(obj)
            for lam in (0.1, 1.0, 10.0):
                spec = ResolventSpec(obj, lam)
                m.append(1e-8 - H2.dist(resolvent_numeric(spec, xs), xs))
                # away from the minimizer the resolvent must move
                for _ in range(5):
                    x = H2.random_point(rng, 2.5)
                    if H2.norm(x, obj.grad(x)) >= 0.1:
                        m.append(H2.dist(resolvent_numeric(spec, x), x) - 1e-4)
    out.append(_result("resolvent_fixed_points_are_minimizers", m, seed, t))
    return out


@dataclass
class FrechetBench:
    gd: object
    rsgd: object
    oracle: np.ndarray
    anchors: np.ndarray
    x0: np.ndarray
    final_dist: float
    k_residual: np.ndarray
    slope: float
    tail_ratio: float


def frechet_bench(seed: int = DEFAULT_SEED, m: int = 5, horizon: int = 10_000, lam: float = 1.0,
                  radius: float = 1.5, rsgd_step: float = 0.5, dim: int = 2):
    """Hyperbolic HalpernGD vs RSGD on an equal-weight Fréchet problem, ``u = x0``."""
    rng = np.random.default_rng(seed)
    sp = ModelSpace(-1, dim)
    anchors = np.array([sp.random_point(rng, radius) for _ in range(m)])
    obj = Objective.frechet(sp, anchors)
    xs = frechet_oracle(obj)
    x0 = sp.random_point(rng, radius)
    gd = hyperbolic_halpern_gd(ResolventSpec(obj, lam), x0, x0, Schedule.harmonic(), horizon,
                               oracle=xs, tol=1e-6)
    rs = rsgd_run(obj, x0, rsgd_step, horizon, oracle=xs, tol=1e-6)
    k = np.arange(1, horizon + 1)
    r = np.asarray(gd.trace.residual[1:])
    kr = k * r
    sel = k >= 100
    slope = float(np.polyfit(np.log(k[sel]), np.log(np.maximum(r[sel], 1e-300)), 1)[0])
    hi = kr[k >= horizon // 2].max()
    mid = kr[(k >= horizon // 10) & (k < horizon // 2)].max()
    return FrechetBench(gd, rs, xs, anchors, x0, gd.dist_to_oracle[-1], kr, slope,
                        float(hi / mid))


# Empirical O(1/k) criterion for the anchored resolvent iteration.
SLOPE_MAX = -0.9
TAIL_RATIO_MAX = 1.25


def optimizer_suite(seed: int = DEFAULT_SEED, horizon: int = 10_000):
    out = resolvent_checks(seed)
    with _Timer() as t:
        b = frechet_bench(seed, horizon=horizon)
    out.append(CheckResult("halpern_gd_final_within_1e-6", b.final_dist <= 1e-6,
                           1e-6 - b.final_dist, seed,
                           {"final_dist": f"{b.final_dist:.3e}",
                            "rsgd_final_dist": f"{b.rsgd.dist_to_oracle[-1]:.3e}"}, t.seconds))
    ok = b.slope <= SLOPE_MAX and b.tail_ratio <= TAIL_RATIO_MAX
    out.append(CheckResult("halpern_gd_k_residual_bounded", ok,
                           min(SLOPE_MAX - b.slope, TAIL_RATIO_MAX - b.tail_ratio), seed,
                           {"slope": round(b.slope, 4), "tail_ratio": round(b.tail_ratio, 4),
                            "max_k_residual": round(float(b.k_residual.max()), 6)}, t.seconds))
    return out


SUITES = {
    "geometry": geometry_suite,
    "operators": operators_suite,
    "km_rates": km_rates_suite,
    "c_recursion": c_recursion_suite,
    "sharpness": sharpness_suite_checks,
    "viscosity": viscosity_suite,
    "optimizer": optimizer_suite,
}


def run_suite(name: str, seed: int = DEFAULT_SEED) -> list:
    if name == "all":
        res = []
        for n in SUITES:
            res.extend(run_suite(n, seed))
        return res
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    return SUITES[name](seed)
