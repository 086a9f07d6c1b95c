"""Workload matrices for SGD with a learning-rate schedule.

The base learning rate is fixed to 1 here; the simulator applies it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .schedules import Schedule
from .trimatrix import LowerTriangular, ToeplitzLT


@dataclass(frozen=True)
class Workload:
    """``a_chi = A_1 diag(chi)`` and the Toeplitz matrix with ``chi`` on its subdiagonals."""

    schedule: Schedule
    a_chi: LowerTriangular
    a_toep: ToeplitzLT

    @property
    def n(self) -> int:
        return self.schedule.n

    @property
    def chi(self) -> np.ndarray:
        return self.schedule.values


def build_workload(s: Schedule) -> Workload:
    chi = np.asarray(s.values, dtype=np.float64)
    a_chi = np.tril(np.broadcast_to(chi, (s.n, s.n)))
    return Workload(schedule=s, a_chi=LowerTriangular(a_chi), a_toep=ToeplitzLT(chi.copy()))


def apply_workload(chi: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Computes ``A_1 diag(chi) m`` as a running sum of scaled rows, O(n^2)."""
    m = np.asarray(m, dtype=np.float64)
    scale = chi.reshape((-1,) + (1,) * (m.ndim - 1))
    return np.cumsum(scale * m, axis=0)
