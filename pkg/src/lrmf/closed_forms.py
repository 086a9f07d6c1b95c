"""Explicit coefficient formulas for the prefix-sum and exponential-decay workloads.

Notation: ``r_j = binom(2j, j) / 4^j`` are the Toeplitz coefficients of the
square root of the all-ones lower-triangular matrix, ``rt_j`` those of its
inverse square root.  For exponential decay ``chi_k = alpha^(k-1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .trimatrix import LowerTriangular, ToeplitzLT, prefix_sum_matrix


def prefix_sqrt_coeffs(n: int) -> np.ndarray:
    """r_0..r_{n-1} via r_j = r_{j-1} (2j - 1) / (2j); no factorials, no overflow."""
    if n < 1:
        raise ValueError("n must be positive")
    j = np.arange(1, n, dtype=np.float64)
    r = np.empty(n)
    r[0] = 1.0
    r[1:] = np.cumprod((2 * j - 1) / (2 * j))
    return r


def prefix_inv_sqrt_coeffs(n: int) -> np.ndarray:
    """rt_0 = 1, rt_t = -r_t / (2t - 1)."""
    r = prefix_sqrt_coeffs(n)
    t = np.arange(n, dtype=np.float64)
    rt = -r / (2 * t - 1)
    rt[0] = 1.0
    return rt


@dataclass(frozen=True)
class ExpDecayParams:
    n: int
    beta: float
    alpha: float

    @classmethod
    def from_beta(cls, n: int, beta: float) -> "ExpDecayParams":
        if n < 1:
            raise ValueError("n must be positive")
        if not 0.0 < beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {beta}")
        alpha = beta ** (1.0 / (n - 1)) if n > 1 else beta
        return cls(n=n, beta=beta, alpha=alpha)

    @classmethod
    def from_alpha(cls, n: int, alpha: float) -> "ExpDecayParams":
        # alpha = 0 is allowed here as a degenerate (identity) case for c_alpha.
        if not 0.0 <= alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
        return cls(n=n, beta=alpha ** max(n - 1, 1), alpha=alpha)

    def schedule_values(self) -> np.ndarray:
        return self.alpha ** np.arange(self.n, dtype=np.float64)


@dataclass(frozen=True)
class ScaledToeplitzLT:
    """Column-scaled Toeplitz: entry (m, l) = colscale[l] * g[m - l] for m >= l."""

    coeffs: np.ndarray
    colscale: np.ndarray

    @property
    def n(self) -> int:
        return self.coeffs.size

    def to_dense(self) -> np.ndarray:
        n = self.n
        idx = np.subtract.outer(np.arange(n), np.arange(n))
        base = np.where(idx >= 0, self.coeffs[np.clip(idx, 0, None)], 0.0)
        return base * self.colscale[None, :]

    def materialize(self) -> LowerTriangular:
        return LowerTriangular(self.to_dense())


def c_alpha(params: ExpDecayParams) -> ToeplitzLT:
    """Learning-rate-aware correlation matrix: Toeplitz coefficients alpha^j r_j."""
    j = np.arange(params.n, dtype=np.float64)
    with np.errstate(under="ignore"):
        powers = params.alpha ** j
    return ToeplitzLT(powers * prefix_sqrt_coeffs(params.n))


def _one_minus_pow(a: float, e: np.ndarray) -> np.ndarray:
    # 1 - a**e without cancellation when a is close to 1.
    return -np.expm1(e * math.log(a))


def sqrt_pochhammer_ratio(a: float, n: int) -> np.ndarray:
    """a_d = prod_{k=1}^d (1 - a^(2k-1)) / (1 - a^(2k)) for d = 0..n-1."""
    k = np.arange(1, n, dtype=np.float64)
    num = _one_minus_pow(a, 2 * k - 1)
    den = _one_minus_pow(a, 2 * k)
    out = np.empty(n)
    out[0] = 1.0
    if a > math.sqrt(0.999):
        out[1:] = np.exp(np.cumsum(np.log(num) - np.log(den)))
    else:
        out[1:] = np.cumprod(num / den)
    return out


def _check_alpha(params: ExpDecayParams) -> None:
    if not 0.0 < params.alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {params.alpha}")


def exp_workload_sqrt(params: ExpDecayParams) -> ScaledToeplitzLT:
    """Closed-form principal square root of the exponential-decay workload.

    Entry (m, l), 1-based, is ``alpha^((l-1)/2) prod_{k=1}^{m-l} (1 - alpha^(k-1/2)) / (1 - alpha^k)``.
    """
    _check_alpha(params)
    a = math.sqrt(params.alpha)
    g = sqrt_pochhammer_ratio(a, params.n)
    colscale = a ** np.arange(params.n, dtype=np.float64)
    return ScaledToeplitzLT(g, colscale)


def exp_workload_inv_sqrt(params: ExpDecayParams) -> ScaledToeplitzLT:
    """Closed-form inverse of :func:`exp_workload_sqrt`.

    With ``a = sqrt(alpha)`` the coefficients are
    ``g_d = (a - 1) / (a (1 - a^(2d-1))) * prod_{k=1}^d (1 - a^(2k-1)) / (1 - a^(2k))``
    and column ``l`` (1-based) is scaled by ``alpha^(-(l-1)/2)``.
    """
    _check_alpha(params)
    a = math.sqrt(params.alpha)
    n = params.n
    d = np.arange(n, dtype=np.float64)
    lead = (a - 1.0) / (a * _one_minus_pow(a, 2 * d - 1))
    g = lead * sqrt_pochhammer_ratio(a, n)
    colscale = a ** -np.arange(n, dtype=np.float64)
    return ScaledToeplitzLT(g, colscale)


def exp_workload(params: ExpDecayParams) -> LowerTriangular:
    chi = params.schedule_values()
    return LowerTriangular(prefix_sum_matrix(params.n).array * chi[None, :])


def b_alpha(params: ExpDecayParams) -> LowerTriangular:
    """B = A_chi C_alpha^{-1}, by triangular solve against C_alpha^T."""
    a_chi = exp_workload(params).array
    c = c_alpha(params).to_dense()
    bt = solve_triangular(c, a_chi.T, lower=True, trans="T", check_finite=False)
    return LowerTriangular(bt.T)


def b_alpha_closed_form(params: ExpDecayParams, shift: int = 1) -> LowerTriangular:
    """Series form of B_alpha.

    Entry (m, l), 1-based::

        alpha^(2m - l - s) r_{m-l} + alpha^(l - s) (1 - alpha^2) sum_{t<m-l} alpha^(2t) r_t

    ``shift = s = 1`` matches ``chi_k = alpha^(k-1)``; ``shift = 0`` is the
    unshifted variant, which corresponds to ``chi_k = alpha^k``.
    """
    n, al = params.n, params.alpha
    r = prefix_sqrt_coeffs(n)
    t = np.arange(n, dtype=np.float64)
    with np.errstate(under="ignore"):
        a2t_r = al ** (2 * t) * r
    partial = np.concatenate(([0.0], np.cumsum(a2t_r)[:-1]))  # sum_{t<d}
    m = np.arange(1, n + 1, dtype=np.float64)[:, None]
    l = np.arange(1, n + 1, dtype=np.float64)[None, :]
    d = (m - l).astype(np.int64)
    mask = d >= 0
    dd = np.where(mask, d, 0)
    with np.errstate(under="ignore", over="ignore"):
        first = np.where(mask, al ** (2 * m - l - shift), 0.0) * r[dd]
        second = al ** (l - shift) * (1 - al ** 2) * partial[dd]
    return LowerTriangular(np.where(mask, first + second, 0.0))


def b_alpha_reconciliation(params: ExpDecayParams) -> dict:
    """Max deviation of the series form from the triangular solve, per index shift."""
    ref = b_alpha(params).array
    return {
        shift: float(np.max(np.abs(b_alpha_closed_form(params, shift).array - ref)))
        for shift in (0, 1)
    }


def log_q_pochhammer_inf(a: float, q: float, tol: float = 1e-16) -> float:
    """log (a; q)_inf, truncated once a factor is within ``tol`` of 1."""
    if not 0.0 <= q < 1.0:
        raise ValueError("need 0 <= q < 1")
    if a == 0.0 or q == 0.0:
        return math.log1p(-a)
    terms = max(1, math.ceil(math.log(tol / abs(a)) / math.log(q)) + 1)
    k = np.arange(terms, dtype=np.float64)
    return float(np.sum(np.log1p(-a * q ** k)))


def q_gamma(x: float, q: float) -> float:
    """Gamma_q(x) = (1 - q)^(1 - x) (q; q)_inf / (q^x; q)_inf."""
    log_val = (1 - x) * math.log1p(-q) + log_q_pochhammer_inf(q, q) - log_q_pochhammer_inf(q ** x, q)
    return math.exp(log_val)


def sqrt_entry_lower_bound(d: int, alpha: float) -> float:
    """max(|binom(-1/2, d)|, sqrt(1 - alpha^2) / Gamma_{alpha^2}(1/2)).

    Bounds prod_{k=1}^d (1 - alpha^(2k-1)) / (1 - alpha^(2k)) from below; apply
    at ``sqrt(alpha)`` to bound the workload-root coefficients.
    """
    r_d = prefix_sqrt_coeffs(d + 1)[d]
    inf_prod = math.sqrt(1 - alpha ** 2) / q_gamma(0.5, alpha ** 2)
    return max(r_d, inf_prod)


def c_alpha_sensitivity_rate(alpha: float) -> float:
    """(1/alpha) sqrt(ln(1 / (1 - alpha^2))): growth rate of the C_alpha column norm."""
    return math.sqrt(math.log(1.0 / (1.0 - alpha ** 2))) / alpha
