"""Step-coefficient sequences and their finite-horizon condition diagnostics.

All schedules are 1-origin: ``s(1)`` is the coefficient of the first update.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Schedule", "ScheduleDiagnostics", "schedule_diagnostics"]

KINDS = ("constant", "harmonic", "power", "km_ratio", "viscosity", "table")


@dataclass(frozen=True)
class Schedule:
    """A coefficient sequence ``lambda_1, lambda_2, ...``.

    ``constant(v)``      v
    ``harmonic``         1 / (k + 1)
    ``power(theta)``     k ** -theta
    ``km_ratio``         k / (k + 1)
    ``viscosity(beta)``  min(2 / ((1 - beta) k), 1)
    ``table(values)``    explicit values, ``values[k - 1]``
    """

    kind: str
    value: float | None = None
    theta: float | None = None
    beta: float | None = None
    values: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant" and (self.value is None or not 0.0 <= self.value <= 1.0):
            raise ValueError("constant schedule needs a value in [0, 1]")
        if self.kind == "power" and (self.theta is None or self.theta <= 0):
            raise ValueError("power schedule needs theta > 0")
        if self.kind == "viscosity" and (self.beta is None or not 0.0 <= self.beta < 1.0):
            raise ValueError("viscosity schedule needs beta in [0, 1)")
        if self.kind == "table":
            vals = tuple(float(v) for v in self.values)
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise ValueError("table values must lie in [0, 1]")
            object.__setattr__(self, "values", vals)

    # constructors
    @classmethod
    def constant(cls, value):
        return cls("constant", value=float(value))

    @classmethod
    def harmonic(cls):
        return cls("harmonic")

    @classmethod
    def power(cls, theta):
        return cls("power", theta=float(theta))

    @classmethod
    def km_ratio(cls):
        return cls("km_ratio")

    @classmethod
    def viscosity(cls, beta):
        return cls("viscosity", beta=float(beta))

    @classmethod
    def table(cls, values):
        return cls("table", values=tuple(values))

    def __call__(self, k: int) -> float:
        if k < 1:
            raise IndexError("schedules are 1-origin")
        if self.kind == "constant":
            return self.value
        if self.kind == "harmonic":
            return 1.0 / (k + 1)
        if self.kind == "power":
            return float(k) ** -self.theta
        if self.kind == "km_ratio":
            return k / (k + 1.0)
        if self.kind == "viscosity":
            return min(2.0 / ((1.0 - self.beta) * k), 1.0)
        if k > len(self.values):
            raise IndexError(f"table schedule has only {len(self.values)} entries")
        return self.values[k - 1]

    def take(self, n: int) -> np.ndarray:
        """``[lambda_1, ..., lambda_n]``."""
        k = np.arange(1, n + 1, dtype=float)
        if self.kind == "constant":
            return np.full(n, self.value)
        if self.kind == "harmonic":
            return 1.0 / (k + 1.0)
        if self.kind == "power":
            return k ** -self.theta
        if self.kind == "km_ratio":
            return k / (k + 1.0)
        if self.kind == "viscosity":
            return np.minimum(2.0 / ((1.0 - self.beta) * k), 1.0)
        if n > len(self.values):
            raise IndexError(f"table schedule has only {len(self.values)} entries")
        return np.array(self.values[:n])

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "power":
            d["theta"] = self.theta
        elif self.kind == "viscosity":
            d["beta"] = self.beta
        elif self.kind == "table":
            d["values"] = list(self.values)
        return d

    @classmethod
    def from_dict(cls, d) -> "Schedule":
        d = dict(d)
        if "values" in d:
            d["values"] = tuple(d["values"])
        return cls(**d)


@dataclass
class ScheduleDiagnostics:
    """Finite-horizon proxies for the classical step conditions.

    None of these prove anything about the infinite sequence.
    """

    horizon: int
    last: float  # C1: lambda_n -> 0
    sum_lambda: float  # C2: sum lambda_n = inf
    sum_lambda_one_minus: float  # KM: sum lambda_n (1 - lambda_n) = inf
    c3_tail: float  # max tail |l_{n+1} - l_n| / l_{n+1}^2
    c4_sum: float  # sum |l_{n+1} - l_n| < inf
    c5_tail: float  # max tail |l_{n+1} - l_n| / l_{n+1}
    c1_ok: bool
    c5_ok: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def schedule_diagnostics(s: Schedule, horizon: int) -> ScheduleDiagnostics:
    if horizon < 10:
        raise ValueError("horizon must be >= 10")
    lam = s.take(horizon)
    diff = np.abs(np.diff(lam))
    tail = slice(horizon // 2, None)
    nxt = lam[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        r5 = np.where(nxt > 0, diff / nxt, np.inf)
        r3 = np.where(nxt > 0, diff / nxt**2, np.inf)
    c5 = float(np.max(r5[tail]))
    c3 = float(np.max(r3[tail]))
    last = float(lam[-1])
    return ScheduleDiagnostics(
        horizon=horizon,
        last=last,
        sum_lambda=float(math.fsum(lam)),
        sum_lambda_one_minus=float(math.fsum(lam * (1.0 - lam))),
        c3_tail=c3,
        c4_sum=float(math.fsum(diff)),
        c5_tail=c5,
        # heuristic: the sequence must have dropped by an order of magnitude
        c1_ok=last <= 0.1 * float(np.max(lam)),
        c5_ok=c5 <= 10.0 / horizon,
    )
