import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from cat0iter.geometry import GeometryError, ModelSpace
from cat0iter.optimizer import (
    Objective,
    OptimizerError,
    ResolventError,
    ResolventSpec,
    frechet_oracle,
    hyperbolic_halpern_gd,
    resolvent,
    resolvent_closed_form,
    resolvent_numeric,
    rsgd_run,
)
from cat0iter.schedules import Schedule

H2 = ModelSpace(-1, 2)
E2 = ModelSpace(0, 2)


def golden_resolvent(sp, x, a, lam):
    """Minimize the prox objective along the geodesic from x to a."""
    def phi(t):
        y = sp.combine(x, a, t)
        return 0.5 * sp.dist(y, a) ** 2 + sp.dist(x, y) ** 2 / (2 * lam)

    t = minimize_scalar(phi, bounds=(0, 1), method="bounded", options={"xatol": 1e-12}).x
    return sp.combine(x, a, t)


# -- resolvent ------------------------------------------------------------

def test_closed_form_unit_lambda_is_midpoint(rng):
    for _ in range(10):
        x, a = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
        J = resolvent_closed_form(H2, x, a, 1.0)
        assert H2.dist(J, H2.midpoint(x, a)) <= 1e-12
        assert H2.dist(J, golden_resolvent(H2, x, a, 1.0)) <= 1e-7


@pytest.mark.parametrize("lam", [0.1, 3.0])
def test_closed_form_matches_line_search(lam, rng):
    x, a = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
    assert H2.dist(resolvent_closed_form(H2, x, a, lam), golden_resolvent(H2, x, a, lam)) <= 1e-7


def test_closed_form_fixes_minimizer(rng):
    a = H2.random_point(rng, 1.0)
    for lam in (0.1, 1.0, 10.0):
        assert H2.dist(resolvent_closed_form(H2, a, a, lam), a) <= 1e-14


def test_closed_form_small_lambda(rng):
    x, a = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
    assert H2.dist(resolvent_closed_form(H2, x, a, 1e-6), x) <= 1e-5


def test_closed_form_rejects_sphere():
    S2 = ModelSpace(1, 2)
    with pytest.raises(GeometryError):
        resolvent_closed_form(S2, [1, 0, 0], [0, 1, 0], 1.0)


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_numeric_matches_closed_form(lam, rng):
    for _ in range(20):
        x, a = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
        J = resolvent_numeric(ResolventSpec(Objective.half_sq_dist(H2, a), lam), x)
        assert H2.dist(J, resolvent_closed_form(H2, x, a, lam)) <= 1e-8


def test_frechet_single_anchor_reduces(rng):
    x, a = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
    J1 = resolvent_numeric(ResolventSpec(Objective.frechet(H2, [a]), 2.0), x)
    J2 = resolvent_numeric(ResolventSpec(Objective.half_sq_dist(H2, a), 2.0), x)
    assert H2.dist(J1, J2) <= 1e-9


def test_large_lambda_approaches_minimizer(rng):
    a1, a2 = H2.random_point(rng, 1.5), H2.random_point(rng, 1.5)
    J = resolvent_numeric(ResolventSpec(Objective.frechet(H2, [a1, a2]), 1e6), a1)
    ts = np.linspace(0, 1, 20001)
    grid = [0.5 * (H2.dist(H2.combine(a1, a2, t), a1) ** 2
                   + H2.dist(H2.combine(a1, a2, t), a2) ** 2) for t in ts]
    best = H2.combine(a1, a2, ts[int(np.argmin(grid))])
    assert H2.dist(J, best) <= 1e-4


def test_numeric_resolvent_reports_nonconvergence(rng):
    x, a = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
    spec = ResolventSpec(Objective.frechet(H2, [a, x]), 1.0, max_iter=1, tol=1e-14)
    with pytest.raises(ResolventError) as err:
        resolvent_numeric(spec, H2.random_point(rng, 2.0))
    assert err.value.grad_norm > 0


def test_resolvent_dispatch(rng):
    x, a = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
    spec = ResolventSpec(Objective.half_sq_dist(H2, a), 1.0, inner="closed_form")
    assert H2.dist(resolvent(spec, x), resolvent_closed_form(H2, x, a, 1.0)) == 0


def test_closed_form_only_for_half_sq_dist(rng):
    with pytest.raises(OptimizerError):
        ResolventSpec(Objective.frechet(H2, [H2.base_point()] * 2), inner="closed_form")


def test_resolvent_is_one_lipschitz(rng):
    anchors = [H2.random_point(rng, 1.5) for _ in range(3)]
    spec = ResolventSpec(Objective.frechet(H2, anchors), 1.0)
    for _ in range(100):
        x, y = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
        assert H2.dist(resolvent(spec, x), resolvent(spec, y)) <= H2.dist(x, y) + 1e-8


# -- objectives -----------------------------------------------------------

def test_weights_must_sum_to_one():
    with pytest.raises(OptimizerError):
        Objective.frechet(H2, [H2.base_point()] * 2, weights=[0.5, 0.6])


@given(st.integers(0, 2**32 - 1))
def test_frechet_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    obj = Objective.frechet(H2, [H2.random_point(rng, 1.5) for _ in range(4)])
    y = H2.random_point(rng, 1.5)
    v = H2.random_tangent_direction(rng, y)
    h = 1e-5
    fd = (obj.value(H2.exp(y, h * v)) - obj.value(H2.exp(y, -h * v))) / (2 * h)
    exact = H2.inner(y, obj.grad(y), v)
    assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


def test_custom_objective():
    obj = Objective.custom(E2, lambda y: float(y @ y) / 2, lambda y: y)
    assert obj.value(np.array([3.0, 4.0])) == 12.5
    with pytest.raises(OptimizerError):
        Objective.custom(E2, None, lambda y: y)


# -- Fréchet oracle -------------------------------------------------------

def test_oracle_single_anchor(rng):
    a = H2.random_point(rng, 1.0)
    assert np.array_equal(frechet_oracle(Objective.frechet(H2, [a])), a)


def test_oracle_two_anchors_midpoint(rng):
    a1, a2 = H2.random_point(rng, 2.0), H2.random_point(rng, 2.0)
    m = frechet_oracle(Objective.frechet(H2, [a1, a2]))
    assert H2.dist(m, H2.midpoint(a1, a2)) <= 1e-10


def test_oracle_euclidean_centroid(rng):
    pts = rng.normal(size=(3, 2))
    m = frechet_oracle(Objective.frechet(E2, pts))
    assert np.allclose(m, pts.mean(axis=0), atol=1e-10)


def test_oracle_stationary(rng):
    obj = Objective.frechet(H2, [H2.random_point(rng, 1.5) for _ in range(5)])
    xs = frechet_oracle(obj)
    assert H2.norm(xs, obj.grad(xs)) <= 1e-12


# -- HalpernGD and RSGD ---------------------------------------------------

def test_halpern_gd_at_minimizer_is_constant(rng):
    obj = Objective.frechet(H2, [H2.random_point(rng, 1.5) for _ in range(3)])
    xs = frechet_oracle(obj)
    run = hyperbolic_halpern_gd(ResolventSpec(obj, 1.0), xs, xs, horizon=20, oracle=xs)
    assert max(run.trace.residual) <= 1e-9
    assert max(run.dist_to_oracle) <= 1e-9


def test_halpern_gd_monotone_toward_anchor(rng):
    a = H2.random_point(rng, 1.0)
    run = hyperbolic_halpern_gd(ResolventSpec(Objective.half_sq_dist(H2, a), 1.0), a,
                                H2.random_point(rng, 2.0), horizon=100, oracle=a)
    d = np.asarray(run.dist_to_oracle)
    assert np.all(d[1:] <= d[:-1] + 1e-12)


def test_halpern_gd_residual_decays_like_one_over_k(rng):
    obj = Objective.frechet(H2, [H2.random_point(rng, 1.5) for _ in range(4)])
    x0 = H2.random_point(rng, 1.5)
    run = hyperbolic_halpern_gd(ResolventSpec(obj, 1.0), x0, x0, Schedule.harmonic(), 400)
    k = np.arange(1, 401)
    kr = k * np.asarray(run.trace.residual[1:])
    assert kr[200:].max() <= 1.25 * kr[40:200].max()


def test_halpern_gd_rejects_sphere():
    S2 = ModelSpace(1, 2)
    obj = Objective.custom(S2, lambda y: 0.0, lambda y: np.zeros(3))
    with pytest.raises(GeometryError):
        hyperbolic_halpern_gd(ResolventSpec(obj, 1.0), [1, 0, 0], [1, 0, 0], horizon=2)


def test_rsgd_unit_step_lands_on_anchor(rng):
    a = H2.random_point(rng, 1.5)
    run = rsgd_run(Objective.half_sq_dist(H2, a), H2.random_point(rng, 1.5), 1.0, 1)
    assert H2.dist(run.final, a) <= 1e-10


def test_rsgd_stationary_at_minimizer(rng):
    a = H2.random_point(rng, 1.0)
    run = rsgd_run(Objective.half_sq_dist(H2, a), a, 0.5, 5)
    assert run.trace.residual[0] == 0 and np.allclose(run.final, a)


def test_rsgd_first_step_quarter_point(rng):
    a1, a2 = H2.random_point(rng, 1.5), H2.random_point(rng, 1.5)
    run = rsgd_run(Objective.frechet(H2, [a1, a2]), a1, 0.5, 1)
    assert H2.dist(run.final, H2.combine(a1, a2, 0.25)) <= 1e-8


@pytest.mark.parametrize("step", [0.0, -1.0])
def test_rsgd_step_must_be_positive(step):
    with pytest.raises(OptimizerError):
        rsgd_run(Objective.half_sq_dist(H2, H2.base_point()), H2.base_point(), step, 3)


def test_rsgd_schedule_step(rng):
    obj = Objective.frechet(H2, [H2.random_point(rng, 1.5) for _ in range(3)])
    run = rsgd_run(obj, H2.base_point(), Schedule.constant(0.5), 200, oracle=frechet_oracle(obj),
                   tol=1e-8)
    assert run.converged


def test_optrun_exports(tmp_path, rng):
    a = H2.random_point(rng, 1.0)
    run = hyperbolic_halpern_gd(ResolventSpec(Objective.half_sq_dist(H2, a), 1.0), a,
                                H2.base_point(), horizon=5, oracle=a, tol=1.0)
    lines = run.to_csv(tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "k,residual,objective,dist_to_oracle" and len(lines) == 7
    summ = json.loads(run.write_summary(tmp_path / "s.json").read_text())
    assert summ["steps"] == 5 and summ["converged"] is True and len(summ["final_point"]) == 3
    assert all(np.isfinite(run.objective_values))
    assert H2.constraint_residual(run.final) <= 1e-12
