import math

import numpy as np
import pytest

from cat0iter.geometry import ModelSpace
from cat0iter.iteration import (
    ANCHOR_WEIGHT_LAMBDA,
    ANCHOR_WEIGHT_ONE_MINUS_LAMBDA,
    IterationConfig,
    IterationError,
    halpern_run,
    km_run,
    picard_run,
    viscosity_run,
)
from cat0iter.operators import (
    ConstantAnchor,
    EllipticRotation,
    GeodesicContraction,
    Identity,
    PlanarRotation,
    RightShift,
    SequenceSpace,
)
from cat0iter.schedules import Schedule

E2 = ModelSpace(0, 2)
H2 = ModelSpace(-1, 2)


def test_km_identity_is_constant():
    x0 = np.array([0.3, -0.4])
    tr = km_run(Identity(E2), IterationConfig(x0, 20, Schedule.constant(0.5), keep_iterates=True))
    assert all(np.array_equal(x, x0) for x in tr.iterates)
    assert max(tr.residual) == 0


def test_km_first_step_is_midpoint():
    T = PlanarRotation(E2, math.pi / 4)
    x0 = np.array([1.0, 0.0])
    tr = km_run(T, IterationConfig(x0, 1, Schedule.constant(0.5), keep_iterates=True))
    assert np.allclose(tr.iterates[1], (x0 + T(x0)) / 2)


def test_km_right_shift_first_step():
    sp = SequenceSpace(4)
    tr = km_run(RightShift(sp), IterationConfig(sp.unit(0), 1, Schedule.constant(0.5),
                                                keep_iterates=True))
    assert np.allclose(tr.iterates[1], [0.5, 0.5, 0, 0])
    assert tr.residual[1] == pytest.approx(1.0)
    assert tr.residual[1] >= 1 / math.sqrt(2)


def test_trace_row_count_and_nonnegativity(rng):
    T = EllipticRotation(H2, 1.0)
    tr = km_run(T, IterationConfig(H2.random_point(rng, 1.0), 37, Schedule.harmonic()))
    assert len(tr) == 38
    assert min(tr.residual) >= 0 and min(tr.step_dist) >= 0


@pytest.mark.parametrize("s", [Schedule.constant(0.3), Schedule.harmonic(), Schedule.power(0.5)])
def test_km_fejer_monotone(s, rng):
    for T, fix in ((EllipticRotation(H2, 2.0), H2.base_point()),
                   (GeodesicContraction(H2, c := H2.random_point(rng, 1.0), 0.7), c)):
        tr = km_run(T, IterationConfig(H2.random_point(rng, 2.0), 300, s, fixed_point=fix))
        d = np.asarray(tr.dist_to_fix)
        assert np.all(d[1:] <= d[:-1] + 1e-9)


def test_halpern_full_anchor_weight(rng):
    u = H2.random_point(rng, 1.0)
    tr = halpern_run(EllipticRotation(H2, 0.5),
                     IterationConfig(H2.random_point(rng, 1.0), 10, Schedule.table([1.0] * 10),
                                     anchor=u, keep_iterates=True))
    assert all(np.allclose(z, u) for z in tr.iterates[1:])


def test_halpern_zero_weight_is_picard(rng):
    T = EllipticRotation(H2, 0.5)
    x0 = H2.random_point(rng, 1.0)
    h = halpern_run(T, IterationConfig(x0, 15, Schedule.table([0.0] * 15), anchor=x0,
                                       keep_iterates=True))
    p = picard_run(T, x0, 15, keep_iterates=True)
    assert np.allclose(h.iterates, p.iterates, atol=1e-12)


def test_halpern_rotation_sharpness_equality():
    for n in (1, 2, 3, 10, 50):
        T = PlanarRotation(E2, math.pi / (n + 1))
        x0 = np.array([1.0, 0.0])
        tr = halpern_run(T, IterationConfig(x0, n, Schedule.km_ratio(), anchor=x0,
                                            convention=ANCHOR_WEIGHT_ONE_MINUS_LAMBDA))
        assert abs(tr.residual[-1] - 2 / (n + 1)) <= 1e-9


def test_halpern_requires_anchor():
    with pytest.raises(IterationError):
        halpern_run(Identity(E2), IterationConfig(np.zeros(2), 3, Schedule.harmonic()))


def test_unknown_convention():
    with pytest.raises(IterationError):
        IterationConfig(np.zeros(2), 3, convention="sideways")


def test_viscosity_with_constant_anchor_is_halpern(rng):
    T = EllipticRotation(H2, 1.7)
    u = H2.random_point(rng, 1.0)
    x0 = H2.random_point(rng, 1.0)
    s = Schedule.harmonic()
    v = viscosity_run(T, IterationConfig(x0, 200, s, contraction=ConstantAnchor(H2, u),
                                         keep_iterates=True))
    h = halpern_run(T, IterationConfig(x0, 200, s, anchor=u, convention=ANCHOR_WEIGHT_LAMBDA,
                                       keep_iterates=True))
    assert np.max(np.abs(np.asarray(v.iterates) - np.asarray(h.iterates))) <= 1e-12
    assert np.allclose(v.residual, h.residual, atol=1e-12)


def test_viscosity_first_step_is_f_of_x0(rng):
    T = EllipticRotation(H2, 0.9)
    f = GeodesicContraction(H2, H2.random_point(rng, 1.0), 0.5)
    x0 = H2.random_point(rng, 1.0)
    tr = viscosity_run(T, IterationConfig(x0, 1, contraction=f, keep_iterates=True))
    assert tr.lam[1] == 1.0
    assert H2.dist(tr.iterates[1], f(x0)) <= 1e-14


def test_viscosity_requires_contraction():
    with pytest.raises(IterationError):
        viscosity_run(Identity(E2), IterationConfig(np.zeros(2), 3))


def test_picard_identity_constant():
    tr = picard_run(Identity(E2), np.array([0.1, 0.2]), 5)
    assert max(tr.residual) == 0 and max(tr.step_dist) == 0


def test_picard_rotation_keeps_residual():
    tr = picard_run(PlanarRotation(E2, math.pi / 4), np.array([1.0, 0.0]), 50)
    assert np.allclose(tr.residual, 2 * math.sin(math.pi / 8), atol=1e-12)


def test_picard_contraction_halves_distance(rng):
    c = H2.random_point(rng, 1.0)
    tr = picard_run(GeodesicContraction(H2, c, 0.5), H2.random_point(rng, 2.0), 20, fixed_point=c)
    d = np.asarray(tr.dist_to_fix)
    assert np.allclose(d[1:], d[:-1] / 2, atol=1e-12)


def test_runs_are_bit_identical(tmp_path, rng):
    T = EllipticRotation(H2, 1.1)
    x0 = H2.random_point(rng, 1.0)
    cfg = IterationConfig(x0, 100, Schedule.constant(0.4), fixed_point=H2.base_point())
    km_run(T, cfg).to_csv(tmp_path / "a.csv")
    km_run(T, cfg).to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_csv_export(tmp_path):
    tr = km_run(PlanarRotation(E2, 1.0), IterationConfig(np.array([1.0, 0.0]), 3,
                                                       Schedule.constant(0.5)))
    lines = tr.to_csv(tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "n,residual,step_dist,dist_to_fix,lambda"
    assert len(lines) == 5
    # missing values are empty; doubles carry 17 significant digits
    assert lines[1].endswith(",,")
    assert len(lines[2].split(",")[1].replace(".", "").lstrip("0")) >= 15
    tr.write_meta(tmp_path / "t.json")
    assert "schedule" in (tmp_path / "t.json").read_text()
