"""Learning-rate decay schedules.

Steps are numbered ``k = 1..n`` in every formula below and stored 0-based,
so ``values[k - 1]`` is the multiplier applied at step ``k``.  All schedules
start at 1; the four decays end at ``beta``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

KINDS = ("constant", "exponential", "polynomial", "linear", "cosine")
DECAYS = ("exponential", "polynomial", "linear", "cosine")

_TOL = 1e-12


class ScheduleError(ValueError):
    pass


def schedule_values(kind: str, n: int, beta: float, gamma: Optional[float] = None) -> np.ndarray:
    """Evaluates the raw decay formula without range validation.

    ``beta = 0`` is accepted here (some formulas are still meaningful at the
    boundary); :func:`make_schedule` applies the real preconditions.
    """
    k = np.arange(1, n + 1, dtype=np.float64)
    frac = (k - 1) / (n - 1)
    if kind == "constant" or beta == 1.0:
        return np.ones(n)
    if kind == "exponential":
        vals = beta ** frac
    elif kind == "polynomial":
        g = 1.0 if gamma is None else gamma
        vals = beta + (1 - beta) * ((n / k) ** g - 1) / (n ** g - 1)
    elif kind == "linear":
        vals = 1 - frac * (1 - beta)
    elif kind == "cosine":
        vals = beta + 0.5 * (1 - beta) * (1 + np.cos(frac * np.pi))
    else:
        raise ScheduleError(f"unknown schedule kind {kind!r}")
    # Pin the endpoints; the closed forms only hit them up to rounding.
    vals[0] = 1.0
    vals[-1] = beta
    return vals


@dataclass(frozen=True)
class Schedule:
    kind: str
    n: int
    beta: float
    values: np.ndarray = field(repr=False)
    gamma: Optional[float] = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n, "beta": self.beta}
        if self.gamma is not None:
            d["gamma"] = self.gamma
        d["values"] = [float(v) for v in self.values]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Schedule":
        s = make_schedule(d["kind"], int(d["n"]), float(d["beta"]), d.get("gamma"))
        if "values" in d and not np.allclose(s.values, d["values"], rtol=0, atol=_TOL):
            raise ScheduleError("stored values disagree with the schedule formula")
        return s

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))


def make_schedule(kind: str, n: int, beta: float = 1.0, gamma: Optional[float] = None) -> Schedule:
    """Builds a validated schedule.

    Args:
      kind: one of ``KINDS``.
      n: number of steps, at least 2.
      beta: final multiplier in (0, 1].  ``beta = 1`` gives all ones for any kind.
      gamma: polynomial exponent (>= 1); only allowed for ``kind="polynomial"``.

    Raises:
      ScheduleError: on any violated precondition.
    """
    if kind not in KINDS:
        raise ScheduleError(f"unknown schedule kind {kind!r}; expected one of {KINDS}")
    if int(n) != n or n < 2:
        raise ScheduleError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    if not (0.0 < beta <= 1.0):
        raise ScheduleError(f"beta must lie in (0, 1], got {beta}")
    if kind == "polynomial":
        gamma = 1.0 if gamma is None else float(gamma)
        if gamma < 1.0:
            raise ScheduleError(f"gamma must be >= 1, got {gamma}")
    elif gamma is not None:
        raise ScheduleError(f"gamma is only valid for the polynomial schedule, not {kind!r}")
    if kind == "constant":
        beta = 1.0
    values = schedule_values(kind, n, beta, gamma)
    values.setflags(write=False)
    return Schedule(kind=kind, n=n, beta=float(beta), values=values, gamma=gamma)


def check_invariants(s: Schedule) -> None:
    """Raises AssertionError if the schedule breaks its structural invariants."""
    v = s.values
    assert v.shape == (s.n,)
    assert v[0] == 1.0
    end = 1.0 if s.kind == "constant" else s.beta
    assert abs(v[-1] - end) <= _TOL
    assert np.all(np.diff(v) <= _TOL)
    assert np.all(v >= s.beta - _TOL) and np.all(v <= 1.0 + _TOL)


@dataclass(frozen=True)
class DecayConditionReport:
    """Regularity diagnostics for a decaying schedule.

    ``passes_aggregate`` compares the squared deltas against ``c*ln(n)/n``,
    a finite-n proxy for the asymptotic little-o condition.
    """

    max_scaled_delta: float
    sum_sq_delta: float
    passes_pointwise: bool
    passes_aggregate: bool
    aggregate_threshold: float
    aggregate_is_proxy: bool = True


def check_decay_condition(s: Schedule, c: float) -> DecayConditionReport:
    if s.n < 2:
        raise ScheduleError("need at least two steps")
    if c <= 0:
        raise ScheduleError("c must be positive")
    delta = np.abs(np.diff(s.values))
    t = np.arange(1, s.n, dtype=np.float64)
    limit = 1.0 / (t * (1.0 + np.log(t)))
    scaled = delta / limit
    sum_sq = float(np.sum(delta ** 2))
    threshold = c * math.log(s.n) / s.n
    return DecayConditionReport(
        max_scaled_delta=float(scaled.max()),
        sum_sq_delta=sum_sq,
        passes_pointwise=bool(np.all(delta <= c * limit)),
        passes_aggregate=sum_sq <= threshold,
        aggregate_threshold=threshold,
    )


# Names used by the public contract.
Theorem1Report = DecayConditionReport
check_theorem1_condition = check_decay_condition
