"""Acceptance criteria, one test per clause at the stated tolerance.

Each criterion prints a ``criterion N: PASS|FAIL`` line in the pytest
terminal summary. Run standalone with ``python tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from cat0iter.iteration import ANCHOR_WEIGHT_LAMBDA, ANCHOR_WEIGHT_ONE_MINUS_LAMBDA
from cat0iter.rates import sharpness_suite
from cat0iter.suites import (
    DEFAULT_SEED,
    SLOPE_MAX,
    TAIL_RATIO_MAX,
    c_recursion_suite,
    frechet_bench,
    geometry_suite,
    km_rates_suite,
    resolvent_checks,
    viscosity_suite,
)

SEED = DEFAULT_SEED


def timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


@pytest.fixture
def record(criterion_log):
    def rec(num, clause, passed, detail):
        criterion_log.setdefault(num, []).append((clause, bool(passed), detail))
        print(f"criterion {num} / {clause}: {'PASS' if passed else 'FAIL'} ({detail})")
        return passed
    return rec


def by_name(results):
    return {r.name: r for r in results}


# -- 1 KM bound -----------------------------------------------------------

@pytest.fixture(scope="module")
def km():
    res, secs = timed(km_rates_suite, SEED)
    return by_name(res), secs


def test_criterion_1_km_bound(km, record):
    res, secs = km
    r = res["km_bound"]
    assert record(1, "residual <= diam/sqrt(pi sum) + 1e-9", r.passed,
                  f"worst margin {r.worst_margin:.3e}, {r.detail['instances']} instances")
    assert r.detail["instances"] >= 100


def test_criterion_1_runtime(km, record):
    assert record(1, "runtime <= 60 s", km[1] <= 60, f"{km[1]:.1f} s")


# -- 2 recursion oracle ---------------------------------------------------

@pytest.fixture(scope="module")
def crec():
    res, secs = timed(c_recursion_suite, SEED, N=50)
    return by_name(res), secs


@pytest.mark.parametrize("name, clause", [
    ("c_mn_dominates_distances", "d(x_n, x_m) <= c_mn + 1e-9"),
    ("P_n_dominates_residual", "residual_n <= P_n + 1e-9"),
    ("probabilistic_inequality", "sqrt(sum) P_n <= 1/sqrt(pi) + 1e-10"),
])
def test_criterion_2_recursion(crec, record, name, clause):
    r = crec[0][name]
    assert record(2, clause, r.passed, f"worst margin {r.worst_margin:.3e}")


def test_criterion_2_runtime(crec, record):
    assert record(2, "runtime <= 120 s", crec[1] <= 120, f"{crec[1]:.1f} s")


# -- 3, 4 sharpness -------------------------------------------------------

@pytest.fixture(scope="module")
def sharp():
    return timed(sharpness_suite, 500, 200)


def test_criterion_3_right_shift(sharp, record):
    rep = sharp[0]
    margin = np.min(rep.shift_residual - rep.shift_lower)
    ok = bool(np.all(rep.shift_residual >= rep.shift_lower - 1e-12))
    assert record(3, "residual_n >= 1/sqrt(n+1) - 1e-12, n <= 500", ok,
                  f"worst margin {margin:.3e}")


def test_criterion_3_runtime(record):
    _, secs = timed(sharpness_suite, 500, 1)
    assert record(3, "runtime <= 5 s", secs <= 5, f"{secs:.2f} s")


def test_criterion_4_selected_convention_matches_everywhere(sharp, record):
    rep = sharp[0]
    sel = rep.convention_selected
    err = np.max(np.abs(rep.rot_residual[sel] - rep.rot_expected)) if sel else np.inf
    assert record(4, "one convention gives 2/(n+1) at every n <= 200", sel is not None,
                  f"convention {sel}, max error {err:.2e}")
    assert sel == ANCHOR_WEIGHT_ONE_MINUS_LAMBDA


def test_criterion_4_other_convention_fails_beyond_n1(sharp, record):
    rep = sharp[0]
    other = rep.rot_matches(ANCHOR_WEIGHT_LAMBDA)
    ok = not other[1:].any()
    assert record(4, "other convention misses 2/(n+1) for 2 <= n <= 200", ok,
                  f"matches at n = {[int(n) for n in rep.rot_n[other]]}")


def test_criterion_4_exactly_one_convention_per_n(sharp, record):
    rep = sharp[0]
    assert record(4, "exactly one convention matches at each n <= 200",
                  rep.exactly_one_everywhere,
                  f"both match at n = {rep.ambiguous_n}")


def test_criterion_4_runtime(sharp, record):
    assert record(4, "runtime <= 10 s", sharp[1] <= 10, f"{sharp[1]:.2f} s")


# -- 5 viscosity ----------------------------------------------------------

@pytest.fixture(scope="module")
def visc():
    res, secs = timed(viscosity_suite, SEED, horizon=10_000)
    return by_name(res), secs


@pytest.mark.parametrize("name, clause", [
    ("visc_step_bound", "d(x_k, x_k-1) <= 2 J C/((1-beta) k) + 1e-9"),
    ("visc_residual_bound", "d(T x_k-1, x_k-1) <= 2 C (J+2)/((1-beta) k) + 1e-9"),
])
def test_criterion_5_viscosity(visc, record, name, clause):
    r = visc[0][name]
    assert record(5, clause, r.passed,
                  f"worst margin {r.worst_margin:.3e}, {r.detail['instances']} instances")


def test_criterion_5_runtime(visc, record):
    assert record(5, "runtime <= 60 s", visc[1] <= 60, f"{visc[1]:.1f} s")


# -- 6 resolvent ----------------------------------------------------------

@pytest.fixture(scope="module")
def resolv():
    res, secs = timed(resolvent_checks, SEED, pairs=100, lipschitz_trials=1000)
    return by_name(res), secs


@pytest.mark.parametrize("name, clause", [
    ("resolvent_closed_form_matches_numeric", "closed form = numeric within 1e-8"),
    ("resolvent_1_lipschitz", "1-Lipschitz at tol 1e-8"),
    ("resolvent_fixed_points_are_minimizers", "J fixes the oracle minimizer within 1e-8"),
])
def test_criterion_6_resolvent(resolv, record, name, clause):
    r = resolv[0][name]
    assert record(6, clause, r.passed, f"worst margin {r.worst_margin:.3e}")


def test_criterion_6_runtime(resolv, record):
    assert record(6, "runtime <= 30 s", resolv[1] <= 30, f"{resolv[1]:.1f} s")


# -- 7 HalpernGD benchmark ------------------------------------------------

@pytest.fixture(scope="module")
def bench():
    return timed(frechet_bench, SEED, m=5, horizon=10_000, lam=1.0)


def test_criterion_7_final_within_1e6(bench, record):
    b = bench[0]
    assert record(7, "final iterate within 1e-6 of the oracle", b.final_dist <= 1e-6,
                  f"distance {b.final_dist:.3e} after {len(b.gd.trace) - 1} steps")


def test_criterion_7_k_residual_bounded(bench, record):
    b = bench[0]
    ok = b.slope <= SLOPE_MAX and b.tail_ratio <= TAIL_RATIO_MAX
    assert record(7, "k * d(x_k, J x_k) bounded, no growth", ok,
                  f"max {b.k_residual.max():.4f}, log-log slope {b.slope:.4f}, "
                  f"tail ratio {b.tail_ratio:.4f}")


def test_criterion_7_rsgd_baseline(bench, record):
    b = bench[0]
    ok = len(b.rsgd.trace) == len(b.gd.trace) and np.isfinite(b.rsgd.dist_to_oracle[-1])
    assert record(7, "RSGD baseline on the same problem", ok,
                  f"RSGD distance {b.rsgd.dist_to_oracle[-1]:.3e}")


def test_criterion_7_runtime(bench, record):
    assert record(7, "runtime <= 120 s", bench[1] <= 120, f"{bench[1]:.1f} s")


# -- 8 geometry -----------------------------------------------------------

@pytest.fixture(scope="module")
def geom():
    res, secs = timed(geometry_suite, SEED, samples=1000)
    return by_name(res), secs


@pytest.mark.parametrize("name", [
    "geodesic_parameterization",
    "convexity_condition",
    "cat0_two_geodesic_convexity",
    "cat0_comparison_inequality",
])
def test_criterion_8_geometry(geom, record, name):
    r = geom[0][name]
    assert record(8, name, r.passed and r.detail["samples"] >= 1000,
                  f"worst margin {r.worst_margin:.3e}, {r.detail['samples']} samples")


def test_criterion_8_runtime(geom, record):
    assert record(8, "runtime <= 30 s", geom[1] <= 30, f"{geom[1]:.1f} s")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
