"""Lower bounds on factorization error and unit-constant rate predictors.

All logarithms are natural.  ``t`` is 1-based; ``t = 1`` contributes zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .metrics import ParticipationSchema
from .schedules import Schedule


@dataclass(frozen=True)
class BoundReport:
    lb_maxse: float
    lb_meanse: float
    argmax_maxse: int
    argmax_meanse: int
    lb_multi: Optional[float] = None
    argmax_multi: Optional[int] = None


def _running_min_log(chi: np.ndarray):
    n = chi.size
    t = np.arange(1, n + 1, dtype=np.float64)
    return t, np.minimum.accumulate(chi) * np.log(t) / math.pi


def lb_single(s: Schedule) -> BoundReport:
    """max_t (1/pi) min_{j<=t} chi_j ln t, and the same weighted by sqrt(t/n)."""
    if s.n < 2:
        raise ValueError("need n >= 2")
    t, base = _running_min_log(np.asarray(s.values))
    mean_terms = np.sqrt(t / s.n) * base
    i_max, i_mean = int(np.argmax(base)), int(np.argmax(mean_terms))
    return BoundReport(
        lb_maxse=float(base[i_max]),
        lb_meanse=float(mean_terms[i_mean]),
        argmax_maxse=i_max + 1,
        argmax_meanse=i_mean + 1,
    )


def lb_multi_terms(s: Schedule, schema: ParticipationSchema) -> tuple[float, int, float]:
    """The two lower-bound terms for b-min-separated participation.

    Returns ``(term1, argmax_t, term2)`` where::

        term1 = max_t sqrt(k) t chi_t / (pi sqrt(2) n) * min_{j<=t} chi_j * ln t
        term2 = sum_{j=0}^{k-1} chi_{1+jb} (1 - j/(k-1))

    For ``k = 1`` the second sum is undefined (0/0 weight); it is taken as
    ``chi_1``, the single-participation value.
    """
    if schema.mode != "minsep":
        raise ValueError("lb_multi needs a minsep schema")
    chi = np.asarray(s.values)
    n, b, k = s.n, schema.b, schema.k
    if 1 + (k - 1) * b > n:
        raise ValueError(f"participation index 1+(k-1)b = {1 + (k - 1) * b} exceeds n = {n}")
    t, base = _running_min_log(chi)
    # base already carries the 1/pi factor.
    first = math.sqrt(k) * t * chi / (math.sqrt(2) * n) * base
    i1 = int(np.argmax(first))
    if k == 1:
        second = float(chi[0])
    else:
        j = np.arange(k)
        second = float(np.sum(chi[j * b] * (1 - j / (k - 1))))
    return float(first[i1]), i1 + 1, second


def lb_multi(s: Schedule, schema: ParticipationSchema) -> float:
    term1, _, term2 = lb_multi_terms(s, schema)
    return max(term1, term2)


def bounds_report(s: Schedule, schema: Optional[ParticipationSchema] = None) -> BoundReport:
    rep = lb_single(s)
    if schema is None or schema.mode != "minsep":
        return rep
    term1, t1, term2 = lb_multi_terms(s, schema)
    return BoundReport(
        lb_maxse=rep.lb_maxse,
        lb_meanse=rep.lb_meanse,
        argmax_maxse=rep.argmax_maxse,
        argmax_meanse=rep.argmax_meanse,
        lb_multi=max(term1, term2),
        argmax_multi=t1 if term1 >= term2 else 1,
    )


def _log_ratio(n: float, beta: float) -> tuple[float, float]:
    if not 0.0 < beta < 1.0:
        raise ValueError("rate predictors need beta in (0, 1)")
    lb = math.log(1.0 / beta)
    return lb, math.log(n / lb)


def _maxse_prefix_exp(n, beta, b, k):
    _, lr = _log_ratio(n, beta)
    return math.sqrt(math.log(n)) * math.sqrt(lr)


def _meanse_prefix_exp(n, beta, b, k):
    lb, _ = _log_ratio(n, beta)
    return math.log(n) / math.sqrt(lb)


def _maxse_lr_aware(n, beta, b, k):
    return _log_ratio(n, beta)[1]


def _meanse_lr_aware(n, beta, b, k):
    lb, lr = _log_ratio(n, beta)
    return math.sqrt(math.log(n) / lb) * math.sqrt(lr)


def _multi_prefix_exp(n, beta, b, k):
    lb, _ = _log_ratio(n, beta)
    return (math.sqrt(k) * math.log(n) + k) / math.sqrt(lb)


def _lb_maxse_exp(n, beta, b, k):
    return _log_ratio(n, beta)[1]


def _lb_meanse_exp(n, beta, b, k):
    lb, lr = _log_ratio(n, beta)
    return lr / math.sqrt(lb)


def _lb_multi_exp(n, beta, b, k):
    lb, lr = _log_ratio(n, beta)
    return math.sqrt(k) / lb * lr + k / lb


RATE_FAMILIES = {
    "maxse_prefix_exp": _maxse_prefix_exp,
    "meanse_prefix_exp": _meanse_prefix_exp,
    "maxse_lr_aware": _maxse_lr_aware,
    "meanse_lr_aware": _meanse_lr_aware,
    "multi_prefix_exp": _multi_prefix_exp,
    "lb_maxse_exp": _lb_maxse_exp,
    "lb_meanse_exp": _lb_meanse_exp,
    "lb_multi_exp": _lb_multi_exp,
}


def rate_predictors(family: str, n: float, beta: float, b: Optional[int] = None,
                    k: Optional[int] = None) -> float:
    """Asymptotic rate with its leading constant set to 1.

    Only meaningful as a trend: ratios of measured error to this value should
    stay roughly flat as ``n`` grows.
    """
    try:
        fn = RATE_FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown rate family {family!r}; choose from {sorted(RATE_FAMILIES)}") from None
    if family in ("multi_prefix_exp", "lb_multi_exp"):
        if k is None:
            if b is None:
                raise ValueError(f"{family} needs k or b")
            k = math.ceil(n / b)
    return fn(n, beta, b, k)
