"""Lower-triangular and lower-triangular Toeplitz linear algebra.

Dense matrices are kept as full ``(n, n)`` float64 arrays with explicit zeros
above the diagonal; the packed row-major triangle is only used on disk.
Toeplitz matrices are stored by their first column ``c_0..c_{n-1}``, entry
``(i, j) = c_{i-j}``.

Dense kernels are O(n^3) and capped at ``MAX_DENSE_N``; Toeplitz kernels are
O(n^2).  Everything here is single threaded apart from whatever BLAS does
inside ``matmul``/``solve_triangular``, so repeated calls are bit-identical.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numba
import numpy as np
from scipy.linalg import solve_triangular

MAX_DENSE_N = 4096
MAGIC = b"LTM1"
_FLAG_DENSE = 0
_FLAG_TOEPLITZ = 1


class MatrixError(ValueError):
    pass


@dataclass(frozen=True)
class LowerTriangular:
    array: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.array, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise MatrixError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] > MAX_DENSE_N:
            raise MatrixError(f"dense size {a.shape[0]} exceeds cap {MAX_DENSE_N}")
        object.__setattr__(self, "array", np.tril(a))

    @property
    def n(self) -> int:
        return self.array.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.array

    def packed(self) -> np.ndarray:
        return self.array[np.tril_indices(self.n)]

    @classmethod
    def from_packed(cls, n: int, entries) -> "LowerTriangular":
        entries = np.asarray(entries, dtype=np.float64)
        if entries.shape != (n * (n + 1) // 2,):
            raise MatrixError("packed length does not match n")
        a = np.zeros((n, n))
        a[np.tril_indices(n)] = entries
        return cls(a)

    @classmethod
    def identity(cls, n: int) -> "LowerTriangular":
        return cls(np.eye(n))


@dataclass(frozen=True)
class ToeplitzLT:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.ndim != 1 or c.size == 0:
            raise MatrixError("Toeplitz coefficients must be a nonempty vector")
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.size

    def to_dense(self) -> np.ndarray:
        return toeplitz_dense(self.coeffs)

    def materialize(self) -> LowerTriangular:
        return LowerTriangular(self.to_dense())

    @classmethod
    def from_dense(cls, a: Union[np.ndarray, LowerTriangular], atol: float = 0.0) -> "ToeplitzLT":
        a = as_dense(a)
        t = cls(a[:, 0].copy())
        if np.max(np.abs(t.to_dense() - np.tril(a))) > atol:
            raise MatrixError("matrix is not lower-triangular Toeplitz")
        return t


Matrix = Union[LowerTriangular, ToeplitzLT, np.ndarray]


def as_dense(a: Matrix) -> np.ndarray:
    if isinstance(a, (LowerTriangular, ToeplitzLT)):
        return a.to_dense()
    return np.asarray(a, dtype=np.float64)


def toeplitz_dense(coeffs: np.ndarray) -> np.ndarray:
    c = np.asarray(coeffs, dtype=np.float64)
    n = c.size
    idx = np.subtract.outer(np.arange(n), np.arange(n))
    out = np.where(idx >= 0, c[np.clip(idx, 0, None)], 0.0)
    return out


def prefix_sum_matrix(n: int) -> LowerTriangular:
    return LowerTriangular(np.tril(np.ones((n, n))))


def lt_multiply(a: Matrix, b: Matrix) -> LowerTriangular:
    da, db = as_dense(a), as_dense(b)
    if da.shape != db.shape:
        raise MatrixError(f"dimension mismatch {da.shape} vs {db.shape}")
    return LowerTriangular(da @ db)


def _check_diag(a: np.ndarray) -> None:
    d = np.diag(a)
    if np.any(~(d > 0)):
        raise MatrixError("matrix must have a strictly positive diagonal")


def lt_inverse(a: Matrix) -> LowerTriangular:
    """Inverse by forward substitution against the identity (LAPACK trtrs)."""
    da = as_dense(a)
    _check_diag(da)
    inv = solve_triangular(da, np.eye(da.shape[0]), lower=True, check_finite=False)
    return LowerTriangular(inv)


@numba.njit(cache=True)
def _tri_sqrt_kernel(a):
    n = a.shape[0]
    s = np.zeros((n, n))
    # st mirrors s transposed so both factors of the inner sum are read contiguously.
    st = np.zeros((n, n))
    for i in range(n):
        s[i, i] = np.sqrt(a[i, i])
        st[i, i] = s[i, i]
    for d in range(1, n):
        for i in range(d, n):
            j = i - d
            acc = a[i, j]
            for k in range(j + 1, i):
                acc -= s[i, k] * st[j, k]
            denom = s[i, i] + s[j, j]
            if abs(denom) < 1e-300:
                return s, i, j
            s[i, j] = acc / denom
            st[j, i] = s[i, j]
    return s, -1, -1


def lt_sqrt(a: Matrix) -> LowerTriangular:
    """Principal square root of a lower-triangular matrix.

    The root with positive diagonal is unique.  Entries are filled one
    subdiagonal at a time::

        S[i, i] = sqrt(A[i, i])
        S[i, j] = (A[i, j] - sum_{j<k<i} S[i, k] S[k, j]) / (S[i, i] + S[j, j])
    """
    da = np.ascontiguousarray(as_dense(a))
    _check_diag(da)
    s, bi, bj = _tri_sqrt_kernel(np.tril(da))
    if bi >= 0:
        raise MatrixError(f"square-root recurrence blew up at entry ({bi}, {bj})")
    return LowerTriangular(s)


def toeplitz_sqrt(t: ToeplitzLT) -> ToeplitzLT:
    """Square root of a power series: s_0 = sqrt(c_0), s_k = (c_k - sum s_j s_{k-j}) / (2 s_0)."""
    c = t.coeffs
    if not c[0] > 0:
        raise MatrixError("leading Toeplitz coefficient must be positive")
    n = c.size
    s = np.zeros(n)
    s[0] = np.sqrt(c[0])
    for k in range(1, n):
        inner = np.dot(s[1:k], s[k - 1:0:-1]) if k > 1 else 0.0
        s[k] = (c[k] - inner) / (2 * s[0])
    return ToeplitzLT(s)


def toeplitz_inverse(t: ToeplitzLT) -> ToeplitzLT:
    """Reciprocal power series: d_0 = 1/c_0, d_k = -(sum_{j=1}^k c_j d_{k-j}) / c_0."""
    c = t.coeffs
    if c[0] == 0:
        raise MatrixError("leading Toeplitz coefficient must be nonzero")
    n = c.size
    d = np.zeros(n)
    d[0] = 1.0 / c[0]
    # Only the nonzero prefix of c contributes; this keeps banded inputs O(n p).
    nz = np.flatnonzero(c)
    last = int(nz[-1]) if nz.size else 0
    for k in range(1, n):
        m = min(k, last)
        if m < 1:
            continue
        d[k] = -np.dot(c[1:m + 1], d[k - m:k][::-1]) / c[0]
    return ToeplitzLT(d)


def toeplitz_multiply(a: ToeplitzLT, b: ToeplitzLT) -> ToeplitzLT:
    if a.n != b.n:
        raise MatrixError("dimension mismatch")
    return ToeplitzLT(np.convolve(a.coeffs, b.coeffs)[: a.n])


def band(a: Matrix, p: int):
    """Keeps the main diagonal and the ``p - 1`` subdiagonals below it."""
    n = a.n if isinstance(a, (LowerTriangular, ToeplitzLT)) else as_dense(a).shape[0]
    if int(p) != p or not 1 <= p <= n:
        raise MatrixError(f"bandwidth must be in [1, {n}], got {p}")
    if isinstance(a, ToeplitzLT):
        c = a.coeffs.copy()
        c[p:] = 0.0
        return ToeplitzLT(c)
    da = as_dense(a)
    out = np.triu(np.tril(da), -(p - 1))
    return LowerTriangular(out) if isinstance(a, LowerTriangular) else out


def col_norms(a: Matrix) -> np.ndarray:
    if isinstance(a, ToeplitzLT):
        # Column l holds c_0..c_{n-1-l}.
        return np.sqrt(np.cumsum(a.coeffs ** 2))[::-1].copy()
    return np.linalg.norm(as_dense(a), axis=0)


def row_norms(a: Matrix) -> np.ndarray:
    if isinstance(a, ToeplitzLT):
        return np.sqrt(np.cumsum(a.coeffs ** 2))
    return np.linalg.norm(as_dense(a), axis=1)


def frobenius(a: Matrix) -> float:
    if isinstance(a, ToeplitzLT):
        n = a.n
        return float(np.sqrt(np.sum((n - np.arange(n)) * a.coeffs ** 2)))
    return float(np.linalg.norm(as_dense(a)))


def max_abs_diff(a: Matrix, b: Matrix) -> float:
    return float(np.max(np.abs(as_dense(a) - as_dense(b))))


# --- serialization -----------------------------------------------------------


def save_matrix(path, a: Union[LowerTriangular, ToeplitzLT]) -> None:
    """Writes ``LTM1 | n:u64 | flag:u8 | float64 payload``, all little-endian."""
    if isinstance(a, ToeplitzLT):
        flag, payload = _FLAG_TOEPLITZ, a.coeffs
    else:
        flag, payload = _FLAG_DENSE, a.packed()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<QB", a.n, flag))
        f.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())


def load_matrix(path) -> Union[LowerTriangular, ToeplitzLT]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise MatrixError(f"{path}: bad magic {raw[:4]!r}")
    n, flag = struct.unpack_from("<QB", raw, 4)
    body = np.frombuffer(raw, dtype="<f8", offset=13).astype(np.float64)
    if flag == _FLAG_TOEPLITZ:
        if body.size != n:
            raise MatrixError(f"{path}: expected {n} coefficients, found {body.size}")
        return ToeplitzLT(body)
    if flag == _FLAG_DENSE:
        return LowerTriangular.from_packed(n, body)
    raise MatrixError(f"{path}: unknown storage flag {flag}")


def export_csv(path, a: Matrix) -> None:
    """Writes ``i,j,value`` for every stored lower-triangle entry (0-based)."""
    d = as_dense(a)
    n = d.shape[0]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["i", "j", "value"])
        for i in range(n):
            for j in range(i + 1):
                w.writerow([i, j, repr(float(d[i, j]))])
