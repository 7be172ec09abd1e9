"""Command line runner: ``cat0iter run|verify|bench``.

Exit codes: 0 success, 1 bound violation or failed check, 2 usage error.
The output directory is ``--out`` if given, else ``$CAT0ITER_OUT``, else the
config's ``output`` field.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import GeometryError, ModelSpace
from .iteration import (
    ANCHOR_WEIGHT_LAMBDA,
    CONVENTIONS,
    IterationConfig,
    IterationError,
    halpern_run,
    km_run,
    picard_run,
    viscosity_run,
)
from .operators import SequenceSpace, operator_from_dict
from .optimizer import (
    Objective,
    OptimizerError,
    ResolventSpec,
    frechet_oracle,
    hyperbolic_halpern_gd,
    rsgd_run,
)
from .rates import (
    BoundError,
    BoundReport,
    check_c_recursion,
    check_km_trace,
    visc_bound_report,
    visc_constants,
    write_summary,
)
from .schedules import Schedule

OUT_ENV = "CAT0ITER_OUT"
EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2

ITERATION_KINDS = ("km", "halpern", "viscosity", "picard", "halpern_gd", "rsgd")
CHECKS = ("km_bound", "c_recursion", "visc_bound", "fejer")
OBJECTIVE_KINDS = ("half_sq_dist", "frechet")


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


@dataclass
class ExperimentConfig:
    space: dict
    operator: dict
    iteration: dict
    checks: list = field(default_factory=list)
    output: str = "out"
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        unknown = set(d) - {"space", "operator", "iteration", "checks", "output", "seed"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        for key in ("space", "operator", "iteration"):
            if not isinstance(d.get(key), dict):
                raise ConfigError(key, "required object missing")
        seed = d.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        checks = d.get("checks", [])
        if not isinstance(checks, list):
            raise ConfigError("checks", "must be a list")
        cfg = cls(
            space=copy.deepcopy(d["space"]),
            operator=copy.deepcopy(d["operator"]),
            iteration=copy.deepcopy(d["iteration"]),
            checks=copy.deepcopy(checks),
            output=str(d.get("output", "out")),
            seed=seed,
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError("<file>", f"no such config {path}") from None
        except json.JSONDecodeError as e:
            raise ConfigError("<file>", f"invalid JSON: {e}") from None
        return cls.from_dict(data)

    def validate(self):
        it = self.iteration
        kind = it.get("kind")
        if kind not in ITERATION_KINDS:
            raise ConfigError("iteration.kind", f"must be one of {list(ITERATION_KINDS)}")
        h = it.get("horizon")
        if not isinstance(h, int) or isinstance(h, bool) or h < 0:
            raise ConfigError("iteration.horizon", "must be a nonnegative integer")
        if "x0" not in it:
            raise ConfigError("iteration.x0", "required")
        if kind in ("km", "halpern") and "schedule" not in it:
            raise ConfigError("iteration.schedule", f"required for {kind}")
        if kind == "halpern":
            if "u" not in it:
                raise ConfigError("iteration.u", "required for halpern")
            if it.get("convention", ANCHOR_WEIGHT_LAMBDA) not in CONVENTIONS:
                raise ConfigError("iteration.convention", f"must be one of {list(CONVENTIONS)}")
        if kind == "viscosity" and not isinstance(it.get("f"), dict):
            raise ConfigError("iteration.f", "contraction object required for viscosity")
        if kind == "halpern_gd" and "u" not in it:
            raise ConfigError("iteration.u", "required for halpern_gd")
        if kind in ("halpern_gd", "rsgd"):
            if self.operator.get("kind") not in OBJECTIVE_KINDS:
                raise ConfigError("operator.kind", f"must be one of {list(OBJECTIVE_KINDS)} "
                                  f"for {kind}")
        elif "kind" not in self.operator:
            raise ConfigError("operator.kind", "required")
        if "schedule" in it:
            try:
                Schedule.from_dict(it["schedule"])
            except (TypeError, ValueError) as e:
                raise ConfigError("iteration.schedule", str(e)) from None
        for i, c in enumerate(self.checks):
            name = c if isinstance(c, str) else (c.get("name") if isinstance(c, dict) else None)
            if name not in CHECKS:
                raise ConfigError(f"checks[{i}]", f"must be one of {list(CHECKS)}")
            if name in ("km_bound", "c_recursion") and kind != "km":
                raise ConfigError(f"checks[{i}]", f"{name} applies to km runs only")
            if name in ("km_bound", "c_recursion") and not (isinstance(c, dict) and "diam" in c):
                raise ConfigError(f"checks[{i}].diam", f"{name} needs the region diameter")
            if name == "visc_bound" and kind != "viscosity":
                raise ConfigError(f"checks[{i}]", "visc_bound applies to viscosity runs only")
        if "sequence_length" not in self.space and not {"kappa", "dim"} <= set(self.space):
            raise ConfigError("space", "needs kappa and dim (or sequence_length)")


# -- building -------------------------------------------------------------

def build_space(d: dict):
    if "sequence_length" in d:
        return SequenceSpace(int(d["sequence_length"]))
    try:
        return ModelSpace.from_dict(d)
    except (GeometryError, ValueError, TypeError) as e:
        raise ConfigError("space", str(e)) from None


def build_point(sp, spec, rng, path):
    """Coordinates, ``"base"``, ``{"unit": i}`` or ``{"random": radius}``."""
    try:
        if isinstance(spec, str) and spec == "base":
            return sp.base_point()
        if isinstance(spec, dict) and "random" in spec:
            return sp.random_point(rng, float(spec["random"]))
        if isinstance(spec, dict) and "unit" in spec:
            return sp.unit(int(spec["unit"]))
        return sp._check(np.asarray(spec, dtype=float))
    except (GeometryError, ValueError, TypeError, AttributeError) as e:
        raise ConfigError(path, f"bad point: {e}") from None


def _norm_check(c) -> dict:
    return {"name": c} if isinstance(c, str) else dict(c)


def _fixed_point(cfg, sp, op, rng):
    fp = cfg.iteration.get("fixed_point")
    if fp is not None:
        return build_point(sp, fp, rng, "iteration.fixed_point")
    try:
        return op.fixed_point()
    except Exception:
        return None


def run_experiment(cfg: ExperimentConfig, out_dir) -> tuple[int, dict]:
    """Run one experiment, write artifacts to ``out_dir`` and return ``(exit_code, report)``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    sp = build_space(cfg.space)
    it = cfg.iteration
    kind = it["kind"]
    x0 = build_point(sp, it["x0"], rng, "iteration.x0")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")

    if kind in ("halpern_gd", "rsgd"):
        return _run_optimizer(cfg, sp, x0, rng, out)

    try:
        op = operator_from_dict(cfg.operator, sp)
    except (GeometryError, KeyError, ValueError, TypeError) as e:
        raise ConfigError("operator", str(e)) from None
    fix = _fixed_point(cfg, sp, op, rng)
    checks = [_norm_check(c) for c in cfg.checks]
    keep = any(c["name"] == "c_recursion" for c in checks)
    sched = Schedule.from_dict(it["schedule"]) if "schedule" in it else None
    H = it["horizon"]
    try:
        if kind == "km":
            tr = km_run(op, IterationConfig(x0, H, sched, fixed_point=fix, keep_iterates=keep,
                                            seed=cfg.seed))
        elif kind == "halpern":
            u = build_point(sp, it["u"], rng, "iteration.u")
            tr = halpern_run(op, IterationConfig(
                x0, H, sched, anchor=u, fixed_point=fix, seed=cfg.seed,
                convention=it.get("convention", ANCHOR_WEIGHT_LAMBDA)))
        elif kind == "viscosity":
            try:
                f = operator_from_dict(it["f"], sp)
            except (GeometryError, KeyError, ValueError, TypeError) as e:
                raise ConfigError("iteration.f", str(e)) from None
            tr = viscosity_run(op, IterationConfig(x0, H, sched, contraction=f,
                                                   fixed_point=fix, seed=cfg.seed))
        else:
            tr = picard_run(op, x0, H, fixed_point=fix)
    except (IterationError, GeometryError) as e:
        raise ConfigError("iteration", str(e)) from None

    tr.to_csv(out / "trace.csv")
    tr.write_meta(out / "trace.json")
    report = {"method": kind, "rows": len(tr), "final": [float(v) for v in tr.final],
              "checks": {}}
    violated = False
    for c in checks:
        name = c["name"]
        if name == "km_bound":
            rep = check_km_trace(tr, sched, float(c["diam"]), c.get("tol", 1e-9))
            rep.to_csv(out / "km_bound.csv")
            res = rep.summary()
        elif name == "c_recursion":
            parts = check_c_recursion(tr, sched, float(c["diam"]), tol=c.get("tol", 1e-9))
            res = {}
            for key, rep in parts.items():
                rep.to_csv(out / f"c_recursion_{key}.csv")
                res[key] = rep.summary()
            res["violated"] = any(r["violated"] for r in res.values())
        elif name == "visc_bound":
            xbar = fix if fix is not None else sp.base_point()
            consts = visc_constants(sp, x0, xbar, f, f.lipschitz)
            vr = visc_bound_report(tr, consts, c.get("tol", 1e-9))
            vr.step.to_csv(out / "visc_step.csv")
            vr.residual.to_csv(out / "visc_residual.csv")
            res = vr.summary()
            res["constants"] = {"J": consts.J, "C_xbar": consts.C_xbar, "beta": consts.beta}
        else:  # fejer
            if fix is None:
                raise ConfigError("checks", "fejer needs a known fixed point")
            d = np.asarray(tr.dist_to_fix, dtype=float)
            rep = BoundReport(np.arange(1, len(d)), d[1:], d[:-1], tol=c.get("tol", 1e-9),
                              label="fejer")
            rep.to_csv(out / "fejer.csv")
            res = rep.summary()
        report["checks"][name] = res
        violated = violated or bool(res["violated"])
    report["violated"] = violated
    write_summary(out / "report.json", report)
    return (EXIT_VIOLATION if violated else EXIT_OK), report


def _objective(cfg, sp):
    op = cfg.operator
    try:
        if op["kind"] == "half_sq_dist":
            return Objective.half_sq_dist(sp, np.asarray(op["anchor"], dtype=float))
        return Objective.frechet(sp, np.asarray(op["anchors"], dtype=float), op.get("weights"))
    except (KeyError, ValueError, TypeError, GeometryError) as e:
        raise ConfigError("operator", str(e)) from None


def _run_optimizer(cfg, sp, x0, rng, out):
    it = cfg.iteration
    obj = _objective(cfg, sp)
    try:
        oracle = frechet_oracle(obj)
        if it["kind"] == "halpern_gd":
            u = build_point(sp, it["u"], rng, "iteration.u")
            sched = Schedule.from_dict(it["schedule"]) if "schedule" in it else Schedule.harmonic()
            run = hyperbolic_halpern_gd(ResolventSpec(obj, float(it.get("lam", 1.0))), u, x0,
                                        sched, it["horizon"], oracle=oracle, tol=it.get("tol"))
        else:
            step = Schedule.from_dict(it["step"]) if isinstance(it.get("step"), dict) \
                else float(it.get("step", 0.5))
            run = rsgd_run(obj, x0, step, it["horizon"], oracle=oracle, tol=it.get("tol"))
    except (OptimizerError, GeometryError) as e:
        raise ConfigError("iteration", str(e)) from None
    run.to_csv(out / "trace.csv")
    run.trace.write_meta(out / "trace.json")
    run.write_summary(out / "summary.json")
    report = {"method": it["kind"], "rows": len(run.trace), "summary": run.summary(),
              "oracle": [float(v) for v in oracle], "final_dist_to_oracle": run.dist_to_oracle[-1],
              "checks": {}, "violated": run.converged is False}
    write_summary(out / "report.json", report)
    return (EXIT_VIOLATION if report["violated"] else EXIT_OK), report


# -- benchmark ------------------------------------------------------------

BENCH_DEFAULTS = {"seed": 20251019, "m": 5, "horizon": 10_000, "lam": 1.0, "radius": 1.5,
                  "rsgd_step": 0.5, "dim": 2, "tol": 1e-6, "checks": []}


def run_bench_frechet(params: dict, out_dir) -> tuple[int, dict]:
    from .suites import SLOPE_MAX, TAIL_RATIO_MAX, frechet_bench

    unknown = set(params) - set(BENCH_DEFAULTS) - {"output"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    p = {**BENCH_DEFAULTS, **params}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    b = frechet_bench(int(p["seed"]), int(p["m"]), int(p["horizon"]), float(p["lam"]),
                      float(p["radius"]), float(p["rsgd_step"]), int(p["dim"]))
    b.gd.to_csv(out / "halpern_gd.csv")
    b.rsgd.to_csv(out / "rsgd.csv")
    checks = {
        "final_within_tol": b.final_dist <= p["tol"],
        "k_residual_bounded": b.slope <= SLOPE_MAX and b.tail_ratio <= TAIL_RATIO_MAX,
    }
    for name in p["checks"]:
        if name not in checks:
            raise ConfigError("checks", f"unknown bench check {name!r}")
    report = {
        "params": p,
        "oracle": [float(v) for v in b.oracle],
        "halpern_gd": {**b.gd.summary(), "final_dist_to_oracle": b.final_dist,
                       "max_k_residual": float(b.k_residual.max()), "loglog_slope": b.slope,
                       "tail_ratio": b.tail_ratio},
        "rsgd": {**b.rsgd.summary(), "final_dist_to_oracle": b.rsgd.dist_to_oracle[-1]},
        "checks": {k: bool(v) for k, v in checks.items()},
    }
    violated = any(not checks[n] for n in p["checks"])
    report["violated"] = violated
    write_summary(out / "bench.json", report)
    return (EXIT_VIOLATION if violated else EXIT_OK), report


# -- entry point ----------------------------------------------------------

def _out_dir(arg, fallback):
    return arg or os.environ.get(OUT_ENV) or fallback


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cat0iter", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and config)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--horizon", type=int, help="override the iteration horizon")

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    common(r)
    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=["geometry", "operators", "km_rates", "c_recursion",
                                     "sharpness", "viscosity", "optimizer", "all"])
    common(v)
    b = sub.add_parser("bench", help="run a benchmark")
    b.add_argument("name", choices=["frechet"])
    b.add_argument("config")
    common(b)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_USAGE
    if args.horizon is not None and args.horizon < 0:
        print("error: --horizon must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_bench(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_USAGE


def _cmd_run(args) -> int:
    raw = ExperimentConfig.load(args.config).to_dict()
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.horizon is not None:
        raw["iteration"]["horizon"] = args.horizon
    cfg = ExperimentConfig.from_dict(raw)
    out = _out_dir(args.out, cfg.output)
    code, report = run_experiment(cfg, out)
    for name, res in report["checks"].items():
        status = "VIOLATED" if res["violated"] else "ok"
        print(f"{name}: {status} worst_margin={res.get('worst_margin', '')}")
    if code:
        print(f"bound violation; see {Path(out) / 'report.json'}", file=sys.stderr)
    else:
        print(f"wrote {out}")
    return code


def _cmd_verify(args) -> int:
    from .suites import DEFAULT_SEED, run_suite

    seed = DEFAULT_SEED if args.seed is None else args.seed
    results = run_suite(args.suite, seed)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    out = _out_dir(args.out, None)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_summary(Path(out) / f"verify_{args.suite}.json",
                      {"suite": args.suite, "seed": seed, "failed": failed,
                       "results": [asdict(r) for r in results]})
    return EXIT_VIOLATION if failed else EXIT_OK


def _cmd_bench(args) -> int:
    try:
        params = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise ConfigError("<file>", f"no such config {args.config}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("<file>", f"invalid JSON: {e}") from None
    if not isinstance(params, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    if args.seed is not None:
        params["seed"] = args.seed
    if args.horizon is not None:
        params["horizon"] = args.horizon
    out = _out_dir(args.out, params.get("output", "out"))
    code, rep = run_bench_frechet(params, out)
    gd, rs = rep["halpern_gd"], rep["rsgd"]
    print(f"halpern_gd: steps={gd['steps']} dist_to_oracle={gd['final_dist_to_oracle']:.3e} "
          f"max_k_residual={gd['max_k_residual']:.6f} slope={gd['loglog_slope']:.3f}")
    print(f"rsgd:       steps={rs['steps']} dist_to_oracle={rs['final_dist_to_oracle']:.3e}")
    print(f"wrote {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
