"""Sensitivity and error functionals of a factorization.

Errors are reported for unit clip norm and unit noise multiplier; use
:func:`dp_scale` to put them on an absolute scale.

Multi-participation sensitivity assumes b-min-separated participation: a
user contributes at most ``k`` rows whose indices are pairwise at least ``b``
apart, and each contributed row changes by at most 1 in l2 norm.  For a
participation pattern ``pi`` and change rows ``x_i`` the squared change of
``C G`` is ``sum_{i,j in pi} K_ij <x_i, x_j>`` with ``K = C^T C``.  When
``C >= 0`` entrywise every ``K_ij >= 0``, so aligning all ``x_i`` along one
unit vector is worst case and the sensitivity becomes
``max_pi || sum_{i in pi} C[:, i] ||_2``.  Matrices with negative entries
are rejected rather than approximated.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numba
import numpy as np

from .trimatrix import Matrix, as_dense, col_norms, frobenius, row_norms

EXACT_MAX_N = 24


class SensitivityError(ValueError):
    pass


@dataclass(frozen=True)
class ParticipationSchema:
    """``single`` (one participation) or ``minsep`` with separation ``b`` and cap ``k``."""

    mode: str = "single"
    b: Optional[int] = None
    k: Optional[int] = None

    @classmethod
    def single(cls) -> "ParticipationSchema":
        return cls("single")

    @classmethod
    def minsep(cls, n: int, b: int, k: Optional[int] = None) -> "ParticipationSchema":
        if b < 1:
            raise SensitivityError("separation b must be >= 1")
        kmax = math.ceil(n / b)
        k = kmax if k is None else int(k)
        if not 1 <= k <= kmax:
            raise SensitivityError(f"k must lie in [1, ceil(n/b) = {kmax}], got {k}")
        return cls("minsep", int(b), k)

    def is_valid_pattern(self, pattern) -> bool:
        idx = sorted(pattern)
        if not idx:
            return False
        if self.mode == "single":
            return len(idx) == 1
        gaps_ok = all(j - i >= self.b for i, j in zip(idx, idx[1:]))
        return gaps_ok and len(idx) <= self.k


@dataclass(frozen=True)
class ErrorReport:
    sensitivity: float
    maxse: float
    meanse: float
    multi_error: Optional[float] = None
    strategy: str = ""
    schedule: str = ""
    n: int = 0
    beta: float = 1.0

    def as_dict(self) -> dict:
        return asdict(self)


def sensitivity_single(c: Matrix) -> float:
    return float(np.max(col_norms(c)))


def _require_nonnegative(c: np.ndarray) -> None:
    if np.any(c < 0):
        raise SensitivityError("multi-participation sensitivity needs an entrywise nonnegative C")


@numba.njit(cache=True)
def _max_pattern_sq(gram, b, k):
    # Depth-first walk over every nonempty b-separated pattern of size <= k.
    # acc[i] = sum_{j in pattern} gram[i, j]; value = sum_{i in pattern} acc[i].
    n = gram.shape[0]
    best = 0.0
    stack_idx = np.empty(k, np.int64)
    acc = np.zeros((k + 1, n))
    val = np.zeros(k + 1)
    depth = 0
    stack_idx[0] = 0
    while True:
        i = stack_idx[depth]
        if i >= n:
            if depth == 0:
                break
            depth -= 1
            stack_idx[depth] += 1
            continue
        # add column i on top of the pattern at this depth
        v = val[depth] + 2.0 * acc[depth, i] + gram[i, i]
        if v > best:
            best = v
        if depth + 1 < k and i + b < n:
            for r in range(n):
                acc[depth + 1, r] = acc[depth, r] + gram[r, i]
            val[depth + 1] = v
            depth += 1
            stack_idx[depth] = i + b
        else:
            stack_idx[depth] += 1
    return best


def _heuristic_sq(c: np.ndarray, b: int, k: int) -> float:
    best = float(np.max(np.sum(c * c, axis=0)))
    n = c.shape[1]
    for s in range(min(b, n)):
        cols = c[:, s::b][:, :k]
        partial = np.cumsum(cols, axis=1)
        best = max(best, float(np.max(np.sum(partial * partial, axis=0))))
    return best


def sensitivity_multi(c: Matrix, schema: ParticipationSchema, mode: str = "heuristic") -> float:
    """Worst-case Frobenius change of ``C G`` under ``schema``.

    ``mode="exact"`` enumerates every admissible pattern (``n <= 24``);
    ``mode="heuristic"`` only tries single columns and the arithmetic patterns
    ``{s, s+b, s+2b, ...}`` truncated at every length, for ``s`` in the first
    ``b`` indices.  The heuristic is a lower bound on the exact value.
    """
    if schema.mode == "single":
        return sensitivity_single(c)
    dc = as_dense(c)
    _require_nonnegative(dc)
    if mode == "exact":
        n = dc.shape[1]
        if n > EXACT_MAX_N:
            raise SensitivityError(f"exact enumeration is capped at n <= {EXACT_MAX_N}, got {n}")
        gram = dc.T @ dc
        return math.sqrt(_max_pattern_sq(np.ascontiguousarray(gram), schema.b, schema.k))
    if mode == "heuristic":
        return math.sqrt(_heuristic_sq(dc, schema.b, schema.k))
    raise SensitivityError(f"unknown sensitivity mode {mode!r}")


def sens_lower_frobenius(c: Matrix, b: int) -> float:
    return frobenius(c) / math.sqrt(2 * b)


def max_se(f) -> float:
    return float(np.max(row_norms(f.B))) * sensitivity_single(f.C)


def mean_se(f) -> float:
    return frobenius(f.B) / math.sqrt(f.n) * sensitivity_single(f.C)


def multi_error(b: Matrix, c: Matrix, schema: ParticipationSchema, sens_mode: str = "heuristic") -> float:
    n = as_dense(b).shape[0]
    return frobenius(b) / math.sqrt(n) * sensitivity_multi(c, schema, sens_mode)


def evaluate(f, schema: Optional[ParticipationSchema] = None, sens_mode: str = "heuristic") -> ErrorReport:
    s = f.workload.schedule
    multi = None
    if schema is not None and schema.mode == "minsep":
        multi = multi_error(f.B, f.C, schema, sens_mode)
    return ErrorReport(
        sensitivity=sensitivity_single(f.C),
        maxse=max_se(f),
        meanse=mean_se(f),
        multi_error=multi,
        strategy=f.label,
        schedule=s.kind,
        n=f.n,
        beta=s.beta,
    )


def dp_scale(report: ErrorReport, sigma_eps_delta: float, zeta: float) -> ErrorReport:
    """Multiplies every error field by ``sigma_eps_delta * zeta``."""
    if sigma_eps_delta <= 0 or zeta <= 0:
        raise ValueError("noise multiplier and clip norm must be positive")
    f = sigma_eps_delta * zeta
    return replace(
        report,
        maxse=report.maxse * f,
        meanse=report.meanse * f,
        multi_error=None if report.multi_error is None else report.multi_error * f,
    )
