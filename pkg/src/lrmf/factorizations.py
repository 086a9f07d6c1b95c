"""Factorizations ``A_chi = B C`` of the learning-rate workload.

Single-epoch catalog, addressable by name or by letter:

    (a) prefix_scaled   A_1^{1/2}            x  A_1^{1/2} D
    (b) identity_right  A_chi                x  I
    (c) identity_left   I                    x  A_chi
    (d) square_root     A_chi^{1/2}          x  A_chi^{1/2}
    (e) lr_aware        A_chi T^{-1/2}       x  T^{1/2},   T = Toeplitz(chi)
    (f) prefix_sqrt     A_chi A_1^{-1/2}     x  A_1^{1/2}

plus the banded-inverse-square-root (BISR) family for multi-epoch training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import closed_forms
from .schedules import Schedule
from .trimatrix import (
    LowerTriangular,
    ToeplitzLT,
    band,
    load_matrix,
    lt_inverse,
    lt_sqrt,
    save_matrix,
    toeplitz_dense,
    toeplitz_inverse,
    toeplitz_sqrt,
)
from .workload import Workload, apply_workload, build_workload


class Strategy(str, Enum):
    PREFIX_SCALED = "prefix_scaled"
    IDENTITY_RIGHT = "identity_right"
    IDENTITY_LEFT = "identity_left"
    SQUARE_ROOT = "square_root"
    LR_AWARE = "lr_aware"
    PREFIX_SQRT = "prefix_sqrt"
    BISR = "bisr"

    @classmethod
    def parse(cls, name: Union[str, "Strategy"]) -> "Strategy":
        if isinstance(name, Strategy):
            return name
        key = str(name).strip().lower()
        if key in _LETTERS:
            return _LETTERS[key]
        return cls(key)


_LETTERS = {
    "a": Strategy.PREFIX_SCALED,
    "b": Strategy.IDENTITY_RIGHT,
    "c": Strategy.IDENTITY_LEFT,
    "d": Strategy.SQUARE_ROOT,
    "e": Strategy.LR_AWARE,
    "f": Strategy.PREFIX_SQRT,
}

SINGLE_EPOCH = tuple(_LETTERS.values())
BISR_BASES = ("prefix", "lr")


class FactorizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Factorization:
    strategy: Strategy
    B: LowerTriangular
    C: LowerTriangular
    workload: Workload
    residual: float
    bandwidth: Optional[int] = None
    base: Optional[str] = None
    # Structured C^{-1} when it is cheap to keep; for BISR this is the banded matrix.
    c_inverse: Optional[Union[ToeplitzLT, LowerTriangular]] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.workload.n

    @property
    def label(self) -> str:
        if self.strategy is Strategy.BISR:
            return f"bisr_{self.base}"
        return self.strategy.value

    def noise_matrix(self) -> Union[ToeplitzLT, LowerTriangular]:
        """C^{-1}, the matrix that correlates the per-step Gaussian noise."""
        if self.c_inverse is not None:
            return self.c_inverse
        return lt_inverse(self.C)


def _finish(strategy, b, c, w, **extra) -> Factorization:
    B = b if isinstance(b, LowerTriangular) else LowerTriangular(b)
    C = c if isinstance(c, LowerTriangular) else LowerTriangular(c)
    residual = float(np.max(np.abs(B.array @ C.array - w.a_chi.array)))
    if not residual <= 1e-9 * w.n:
        raise FactorizationError(f"{strategy.value}: residual {residual:.3e} exceeds 1e-9*n")
    if np.any(np.diag(B.array) <= 0) or np.any(np.diag(C.array) <= 0):
        raise FactorizationError(f"{strategy.value}: factor with nonpositive diagonal")
    return Factorization(strategy=strategy, B=B, C=C, workload=w, residual=residual, **extra)


def lr_aware_correlation(w: Workload, closed_form: bool = True) -> ToeplitzLT:
    """(Toeplitz(chi))^{1/2}; exponential decay uses the alpha^j r_j coefficients."""
    s = w.schedule
    if closed_form and s.kind == "exponential" and s.beta < 1.0:
        return closed_forms.c_alpha(closed_forms.ExpDecayParams.from_beta(s.n, s.beta))
    return toeplitz_sqrt(w.a_toep)


def factorize(w: Workload, strategy, closed_form: bool = True) -> Factorization:
    """Builds one of the single-epoch factorizations (a)-(f).

    Args:
      w: workload to factor.
      strategy: a :class:`Strategy` or its name or letter.
      closed_form: for ``lr_aware`` on an exponential schedule, use the
        explicit coefficients instead of the generic Toeplitz square root.
    """
    strategy = Strategy.parse(strategy)
    n, chi = w.n, w.chi
    a_chi = w.a_chi.array

    if strategy is Strategy.PREFIX_SCALED:
        root = toeplitz_dense(closed_forms.prefix_sqrt_coeffs(n))
        return _finish(strategy, root, root * chi[None, :], w)
    if strategy is Strategy.IDENTITY_RIGHT:
        eye = np.eye(n)
        return _finish(strategy, a_chi.copy(), eye, w, c_inverse=LowerTriangular(eye))
    if strategy is Strategy.IDENTITY_LEFT:
        return _finish(strategy, np.eye(n), a_chi.copy(), w)
    if strategy is Strategy.SQUARE_ROOT:
        root = lt_sqrt(w.a_chi)
        return _finish(strategy, root, root, w)
    if strategy is Strategy.LR_AWARE:
        c = lr_aware_correlation(w, closed_form)
        c_inv = toeplitz_inverse(c)
        b = apply_workload(chi, c_inv.to_dense())
        return _finish(strategy, b, c.to_dense(), w, c_inverse=c_inv)
    if strategy is Strategy.PREFIX_SQRT:
        c = ToeplitzLT(closed_forms.prefix_sqrt_coeffs(n))
        c_inv = ToeplitzLT(closed_forms.prefix_inv_sqrt_coeffs(n))
        b = apply_workload(chi, c_inv.to_dense())
        return _finish(strategy, b, c.to_dense(), w, c_inverse=c_inv)
    if strategy is Strategy.BISR:
        raise FactorizationError("use bisr() for the banded-inverse family")
    raise FactorizationError(f"unknown strategy {strategy}")


def bisr(w: Workload, p: int, base: str = "prefix") -> Factorization:
    """Banded inverse square root factorization.

    ``M = band(A^{-1/2}, p)`` with ``A = A_1`` (``base="prefix"``) or
    ``A = A_chi`` (``base="lr"``); then ``C = M^{-1}`` and ``B = A_chi M``.
    The product ``B C`` reproduces ``A_chi`` for every bandwidth.
    """
    if base not in BISR_BASES:
        raise FactorizationError(f"base must be one of {BISR_BASES}, got {base!r}")
    n = w.n
    if not 1 <= p <= n:
        raise ValueError(f"bandwidth must lie in [1, {n}], got {p}")
    if base == "prefix":
        m = band(ToeplitzLT(closed_forms.prefix_inv_sqrt_coeffs(n)), p)
        c = toeplitz_inverse(m).to_dense()
    else:
        inv_root = lt_inverse(lt_sqrt(w.a_chi))
        m = band(inv_root, p)
        c = lt_inverse(m).array
    b = apply_workload(w.chi, m.to_dense())
    return _finish(Strategy.BISR, b, c, w, bandwidth=int(p), base=base, c_inverse=m)


def build(schedule: Schedule, strategy, bandwidth: Optional[int] = None, base: str = "prefix",
          closed_form: bool = True) -> Factorization:
    """Convenience wrapper: schedule + strategy name -> factorization."""
    w = build_workload(schedule)
    strategy = Strategy.parse(strategy)
    if strategy is Strategy.BISR:
        if bandwidth is None:
            raise FactorizationError("bisr needs a bandwidth")
        return bisr(w, bandwidth, base)
    return factorize(w, strategy, closed_form=closed_form)


def save_factorization(f: Factorization, directory) -> Path:
    """Writes ``metadata.json``, ``B.ltm`` and ``C.ltm`` into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    meta = {
        "strategy": f.strategy.value,
        "bandwidth": f.bandwidth,
        "base": f.base,
        "residual": f.residual,
        "schedule": f.workload.schedule.to_dict(),
    }
    (d / "metadata.json").write_text(json.dumps(meta, indent=2))
    save_matrix(d / "B.ltm", f.B)
    save_matrix(d / "C.ltm", f.C)
    if f.c_inverse is not None:
        save_matrix(d / "C_inv.ltm", f.c_inverse)
    return d


def load_factorization(directory) -> Factorization:
    d = Path(directory)
    meta = json.loads((d / "metadata.json").read_text())
    w = build_workload(Schedule.from_dict(meta["schedule"]))
    B, C = load_matrix(d / "B.ltm"), load_matrix(d / "C.ltm")
    c_inv = load_matrix(d / "C_inv.ltm") if (d / "C_inv.ltm").exists() else None
    return _finish(Strategy(meta["strategy"]), B, C, w, bandwidth=meta["bandwidth"],
                   base=meta["base"], c_inverse=c_inv)
