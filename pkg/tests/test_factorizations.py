import math

import numpy as np
import pytest

from lrmf.closed_forms import prefix_sqrt_coeffs
from lrmf.factorizations import (
    BISR_BASES,
    SINGLE_EPOCH,
    FactorizationError,
    Strategy,
    bisr,
    build,
    factorize,
    load_factorization,
    save_factorization,
)
from lrmf.schedules import DECAYS, make_schedule
from lrmf.trimatrix import lt_sqrt, toeplitz_dense
from lrmf.workload import build_workload


def test_parse_letters_and_names():
    assert Strategy.parse("e") is Strategy.LR_AWARE
    assert Strategy.parse("PREFIX_SQRT") is Strategy.PREFIX_SQRT
    with pytest.raises(ValueError):
        Strategy.parse("z")


def test_identity_right():
    w = build_workload(make_schedule("linear", 16, 0.3))
    f = factorize(w, "b")
    np.testing.assert_array_equal(f.B.array, w.a_chi.array)
    np.testing.assert_array_equal(f.C.array, np.eye(16))


def test_prefix_sqrt_on_constant():
    w = build_workload(make_schedule("constant", 16))
    f = factorize(w, "f")
    root = toeplitz_dense(prefix_sqrt_coeffs(16))
    np.testing.assert_allclose(f.B.array, root, atol=1e-14)
    np.testing.assert_allclose(f.C.array, root, atol=1e-14)


def test_lr_aware_coefficients():
    s = make_schedule("exponential", 3, 0.3)
    f = factorize(build_workload(s), "e")
    a = math.sqrt(0.3)
    np.testing.assert_allclose(f.C.array[:, 0], [1, a * 0.5, a * a * 0.375], atol=1e-15)


def test_lr_aware_closed_form_matches_series():
    w = build_workload(make_schedule("exponential", 128, 0.05))
    a = factorize(w, "e", closed_form=True).C.array
    b = factorize(w, "e", closed_form=False).C.array
    assert np.max(np.abs(a - b)) <= 1e-12


def test_prefix_scaled_residual():
    f = factorize(build_workload(make_schedule("exponential", 256, 0.1)), "a")
    assert f.residual <= 1e-10


@pytest.mark.parametrize("kind", DECAYS)
@pytest.mark.parametrize("n", [64, 256])
def test_all_strategies_reconstruct(kind, n):
    w = build_workload(make_schedule(kind, n, 0.05))
    for strat in SINGLE_EPOCH:
        f = factorize(w, strat)
        assert f.residual <= 1e-9 * n, strat
        assert np.max(np.abs(f.B.array @ f.C.array - w.a_chi.array)) <= 1e-9 * n


def test_square_root_squares():
    w = build_workload(make_schedule("cosine", 64, 0.1))
    f = factorize(w, "d")
    np.testing.assert_allclose(f.B.array, lt_sqrt(w.a_chi).array)


@pytest.mark.parametrize("base", BISR_BASES)
@pytest.mark.parametrize("p", [1, 4, 16, 64])
def test_bisr_exact_and_nonnegative(base, p):
    w = build_workload(make_schedule("linear", 64, 0.1))
    f = bisr(w, p, base)
    assert f.residual <= 1e-9 * 64
    assert np.all(f.C.array >= -1e-15)
    m = f.noise_matrix().to_dense()
    assert np.all(np.tril(m, -p) == 0)


def test_bisr_p1_prefix_is_identity_right():
    w = build_workload(make_schedule("exponential", 32, 0.1))
    f = bisr(w, 1, "prefix")
    np.testing.assert_allclose(f.C.array, np.eye(32))
    np.testing.assert_allclose(f.B.array, w.a_chi.array)


def test_bisr_full_band_lr_is_square_root():
    w = build_workload(make_schedule("exponential", 32, 0.1))
    f = bisr(w, 32, "lr")
    np.testing.assert_allclose(f.B.array, lt_sqrt(w.a_chi).array, atol=1e-12)


def test_bisr_errors():
    w = build_workload(make_schedule("exponential", 8, 0.1))
    with pytest.raises(ValueError):
        bisr(w, 0)
    with pytest.raises(ValueError):
        bisr(w, 9)
    with pytest.raises(FactorizationError):
        bisr(w, 2, "other")
    with pytest.raises(FactorizationError):
        build(make_schedule("exponential", 8, 0.1), "bisr")


def test_save_load_round_trip(tmp_path):
    f = build(make_schedule("polynomial", 24, 0.1, 2.0), "bisr", bandwidth=4, base="lr")
    save_factorization(f, tmp_path / "f")
    g = load_factorization(tmp_path / "f")
    assert g.label == "bisr_lr" and g.bandwidth == 4
    np.testing.assert_array_equal(g.B.array, f.B.array)
    np.testing.assert_array_equal(g.noise_matrix().to_dense(), f.noise_matrix().to_dense())
