import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrmf.closed_forms import ExpDecayParams, c_alpha, prefix_inv_sqrt_coeffs, prefix_sqrt_coeffs
from lrmf.trimatrix import (
    LowerTriangular,
    MatrixError,
    ToeplitzLT,
    band,
    col_norms,
    export_csv,
    frobenius,
    load_matrix,
    lt_inverse,
    lt_multiply,
    lt_sqrt,
    max_abs_diff,
    prefix_sum_matrix,
    row_norms,
    save_matrix,
    toeplitz_dense,
    toeplitz_inverse,
    toeplitz_multiply,
    toeplitz_sqrt,
)


def test_tril_enforced():
    a = LowerTriangular(np.ones((3, 3)))
    assert np.all(np.triu(a.array, 1) == 0)


def test_packed_round_trip():
    a = LowerTriangular(np.tril(np.arange(16.0).reshape(4, 4)))
    b = LowerTriangular.from_packed(4, a.packed())
    np.testing.assert_array_equal(a.array, b.array)


def test_multiply_identity_and_prefix():
    b = LowerTriangular(np.tril(np.random.default_rng(0).random((5, 5))))
    np.testing.assert_array_equal(lt_multiply(LowerTriangular.identity(5), b).array, b.array)
    sq = lt_multiply(prefix_sum_matrix(2), prefix_sum_matrix(2)).array
    np.testing.assert_array_equal(sq, [[1, 0], [2, 1]])


def test_prefix_sqrt_squared():
    s = ToeplitzLT(prefix_sqrt_coeffs(3))
    np.testing.assert_allclose(s.coeffs, [1, 0.5, 0.375])
    np.testing.assert_allclose(lt_multiply(s, s).array, prefix_sum_matrix(3).array, atol=1e-15)


def test_inverse_examples():
    np.testing.assert_array_equal(lt_inverse(LowerTriangular.identity(4)).array, np.eye(4))
    inv = lt_inverse(prefix_sum_matrix(3)).array
    np.testing.assert_allclose(inv, [[1, 0, 0], [-1, 1, 0], [0, -1, 1]], atol=1e-15)
    c = c_alpha(ExpDecayParams.from_alpha(3, 0.5))
    expected = toeplitz_dense(0.5 ** np.arange(3) * prefix_inv_sqrt_coeffs(3))
    np.testing.assert_allclose(lt_inverse(c).array, expected, atol=1e-15)


def test_inverse_residual_large():
    n = 1024
    a = LowerTriangular(np.tril(np.random.default_rng(1).random((n, n))) + np.eye(n) * n / 8)
    res = np.max(np.abs(a.array @ lt_inverse(a).array - np.eye(n)))
    assert res <= 1e-10 * n


def test_inverse_rejects_bad_diagonal():
    with pytest.raises(MatrixError):
        lt_inverse(LowerTriangular(np.array([[1.0, 0], [1, 0]])))


def test_sqrt_examples():
    np.testing.assert_array_equal(lt_sqrt(LowerTriangular.identity(3)).array, np.eye(3))
    np.testing.assert_allclose(lt_sqrt(prefix_sum_matrix(3)).array, toeplitz_dense([1, 0.5, 0.375]), atol=1e-15)
    s = lt_sqrt(LowerTriangular(np.array([[1.0, 0], [1, 0.25]]))).array
    np.testing.assert_allclose(s, [[1, 0], [2 / 3, 0.5]], atol=1e-15)


def test_sqrt_rejects_nonpositive():
    with pytest.raises(MatrixError):
        lt_sqrt(LowerTriangular(np.array([[1.0, 0], [1, -1]])))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**31))
def test_sqrt_property(n, seed):
    rng = np.random.default_rng(seed)
    a = np.tril(rng.random((n, n))) + np.diag(rng.random(n) + 0.5)
    s = lt_sqrt(LowerTriangular(a)).array
    assert np.all(np.diag(s) > 0)
    assert np.max(np.abs(s @ s - a)) <= 1e-9


def test_toeplitz_sqrt_examples():
    e = np.zeros(6)
    e[0] = 1
    np.testing.assert_array_equal(toeplitz_sqrt(ToeplitzLT(e)).coeffs, e)
    r = toeplitz_sqrt(ToeplitzLT(np.ones(40))).coeffs
    binom = [math.comb(2 * j, j) / 4 ** j for j in range(40)]
    np.testing.assert_allclose(r, binom, rtol=1e-13)
    alpha = 0.7
    geo = alpha ** np.arange(40)
    np.testing.assert_allclose(toeplitz_sqrt(ToeplitzLT(geo)).coeffs, geo * np.array(binom), atol=1e-14)


def test_toeplitz_inverse_examples():
    np.testing.assert_allclose(toeplitz_inverse(ToeplitzLT(np.ones(5))).coeffs, [1, -1, 0, 0, 0], atol=1e-15)
    r = prefix_sqrt_coeffs(50)
    np.testing.assert_allclose(toeplitz_inverse(ToeplitzLT(r)).coeffs, prefix_inv_sqrt_coeffs(50), atol=1e-14)
    t = ToeplitzLT(np.random.default_rng(2).random(30) + np.r_[1, np.zeros(29)])
    prod = toeplitz_multiply(t, toeplitz_inverse(t)).coeffs
    np.testing.assert_allclose(prod, np.r_[1, np.zeros(29)], atol=1e-10)


def test_toeplitz_errors():
    with pytest.raises(MatrixError):
        toeplitz_sqrt(ToeplitzLT(np.array([0.0, 1.0])))
    with pytest.raises(MatrixError):
        toeplitz_inverse(ToeplitzLT(np.array([0.0, 1.0])))


def test_band():
    a = prefix_sum_matrix(4)
    np.testing.assert_array_equal(band(a, 4).array, a.array)
    np.testing.assert_array_equal(band(a, 1).array, np.eye(4))
    np.testing.assert_array_equal(band(a, 2).array, np.eye(4) + np.eye(4, k=-1))
    assert isinstance(band(ToeplitzLT(np.ones(4)), 2), ToeplitzLT)
    with pytest.raises(MatrixError):
        band(a, 0)
    with pytest.raises(MatrixError):
        band(a, 5)


def test_norms():
    i5 = LowerTriangular.identity(5)
    np.testing.assert_array_equal(col_norms(i5), np.ones(5))
    assert frobenius(i5) == pytest.approx(math.sqrt(5))
    assert np.max(col_norms(prefix_sum_matrix(4))) == pytest.approx(2.0)
    assert np.max(col_norms(ToeplitzLT(prefix_sqrt_coeffs(3)))) == pytest.approx(math.sqrt(89 / 64))


def test_toeplitz_norm_fast_paths_agree():
    t = ToeplitzLT(np.random.default_rng(3).random(20))
    d = t.materialize()
    np.testing.assert_allclose(col_norms(t), col_norms(d), rtol=1e-13)
    np.testing.assert_allclose(row_norms(t), row_norms(d), rtol=1e-13)
    assert frobenius(t) == pytest.approx(frobenius(d), rel=1e-13)


def test_save_load(tmp_path):
    a = LowerTriangular(np.tril(np.random.default_rng(4).random((7, 7))))
    t = ToeplitzLT(np.arange(1.0, 6.0))
    save_matrix(tmp_path / "a.ltm", a)
    save_matrix(tmp_path / "t.ltm", t)
    assert max_abs_diff(load_matrix(tmp_path / "a.ltm"), a) == 0
    t2 = load_matrix(tmp_path / "t.ltm")
    assert isinstance(t2, ToeplitzLT)
    np.testing.assert_array_equal(t2.coeffs, t.coeffs)


def test_load_rejects_garbage(tmp_path):
    p = tmp_path / "bad.ltm"
    p.write_bytes(b"nope")
    with pytest.raises(MatrixError):
        load_matrix(p)


def test_export_csv(tmp_path):
    export_csv(tmp_path / "m.csv", prefix_sum_matrix(2))
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "i,j,value"
    assert len(lines) == 4
