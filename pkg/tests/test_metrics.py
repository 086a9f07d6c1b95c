import itertools
import math

import numpy as np
import pytest

from lrmf.factorizations import bisr, factorize
from lrmf.metrics import (
    ParticipationSchema,
    SensitivityError,
    dp_scale,
    evaluate,
    max_se,
    mean_se,
    multi_error,
    sens_lower_frobenius,
    sensitivity_multi,
    sensitivity_single,
)
from lrmf.closed_forms import ExpDecayParams, prefix_sqrt_coeffs
from lrmf.schedules import make_schedule
from lrmf.trimatrix import LowerTriangular, ToeplitzLT, prefix_sum_matrix, toeplitz_dense
from lrmf.workload import build_workload


def brute_force(c, b, k):
    # Independent oracle: enumerate all index subsets directly.
    n = c.shape[1]
    best = 0.0
    for size in range(1, k + 1):
        for pat in itertools.combinations(range(n), size):
            if all(j - i >= b for i, j in zip(pat, pat[1:])):
                best = max(best, float(np.linalg.norm(c[:, list(pat)].sum(axis=1))))
    return best


def test_single_sensitivity():
    assert sensitivity_single(LowerTriangular.identity(6)) == 1.0
    assert sensitivity_single(prefix_sum_matrix(3)) == pytest.approx(math.sqrt(3))
    assert sensitivity_single(ToeplitzLT(prefix_sqrt_coeffs(3))) == pytest.approx(math.sqrt(89 / 64))


def test_schema_validation():
    s = ParticipationSchema.minsep(10, 3)
    assert s.k == 4
    assert s.is_valid_pattern([0, 3, 9]) and not s.is_valid_pattern([0, 2])
    with pytest.raises(SensitivityError):
        ParticipationSchema.minsep(10, 3, 5)
    with pytest.raises(SensitivityError):
        ParticipationSchema.minsep(10, 0)


def test_multi_equals_single_for_single_schema():
    c = toeplitz_dense(prefix_sqrt_coeffs(10))
    assert sensitivity_multi(c, ParticipationSchema.single()) == sensitivity_single(c)


def test_prefix_sum_sqrt10():
    v = sensitivity_multi(prefix_sum_matrix(4), ParticipationSchema.minsep(4, 2, 2), "exact")
    assert v == pytest.approx(math.sqrt(10), abs=1e-12)


@pytest.mark.parametrize("b,k", [(1, 3), (2, 2), (3, 4)])
def test_identity_gives_sqrt_k(b, k):
    n = 12
    v = sensitivity_multi(LowerTriangular.identity(n), ParticipationSchema.minsep(n, b, k), "exact")
    assert v == pytest.approx(math.sqrt(k))


@pytest.mark.parametrize("seed", range(8))
def test_exact_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 11))
    b = int(rng.integers(1, 4))
    k = int(rng.integers(1, math.ceil(n / b) + 1))
    c = np.tril(rng.random((n, n)))
    v = sensitivity_multi(c, ParticipationSchema.minsep(n, b, k), "exact")
    assert v == pytest.approx(brute_force(c, b, k), abs=1e-12)


@pytest.mark.parametrize("n", [8, 14, 20])
@pytest.mark.parametrize("b", [2, 3, 5])
def test_heuristic_exact_on_toeplitz(n, b):
    schema = ParticipationSchema.minsep(n, b)
    for coeffs in (np.ones(n), prefix_sqrt_coeffs(n), 0.9 ** np.arange(n)):
        c = toeplitz_dense(coeffs)
        ex = sensitivity_multi(c, schema, "exact")
        assert sensitivity_multi(c, schema, "heuristic") == pytest.approx(ex, abs=1e-12)
        assert sens_lower_frobenius(c, b) <= ex + 1e-12


def test_heuristic_never_exceeds_exact():
    rng = np.random.default_rng(5)
    for _ in range(10):
        c = np.tril(rng.random((12, 12)))
        schema = ParticipationSchema.minsep(12, 3)
        assert sensitivity_multi(c, schema, "heuristic") <= sensitivity_multi(c, schema, "exact") + 1e-12


def test_frobenius_bound_examples():
    assert sens_lower_frobenius(LowerTriangular.identity(8), 2) == pytest.approx(math.sqrt(2))
    assert sens_lower_frobenius(prefix_sum_matrix(4), 2) == pytest.approx(math.sqrt(10) / 2)


def test_multi_rejections():
    c = np.array([[1.0, 0], [-0.5, 1]])
    with pytest.raises(SensitivityError):
        sensitivity_multi(c, ParticipationSchema.minsep(2, 1))
    with pytest.raises(SensitivityError):
        sensitivity_multi(np.eye(25), ParticipationSchema.minsep(25, 2), "exact")
    with pytest.raises(SensitivityError):
        sensitivity_multi(np.eye(4), ParticipationSchema.minsep(4, 2), "guess")


def test_identity_left_errors_are_sqrt_n():
    n = 1024
    f = factorize(build_workload(make_schedule("exponential", n, 0.1)), "c")
    assert max_se(f) == pytest.approx(math.sqrt(n), abs=1e-10)
    assert mean_se(f) == pytest.approx(math.sqrt(n), abs=1e-10)


@pytest.mark.parametrize("beta", [0.1, 0.5])
def test_identity_right_meanse_formula(beta):
    n = 1024
    f = factorize(build_workload(make_schedule("exponential", n, beta)), "b")
    a2 = ExpDecayParams.from_beta(n, beta).alpha ** 2
    expected = math.sqrt((a2 ** (n + 1) - a2 * (n + 1) + n) / (n * (1 - a2) ** 2))
    assert mean_se(f) == pytest.approx(expected, abs=1e-10)


def test_constant_prefix_scaled_equals_prefix_sqrt():
    w = build_workload(make_schedule("constant", 64))
    fa, ff = factorize(w, "a"), factorize(w, "f")
    assert max_se(fa) == pytest.approx(max_se(ff), rel=1e-13)
    assert mean_se(fa) == pytest.approx(mean_se(ff), rel=1e-13)


def test_multi_error_reductions():
    w = build_workload(make_schedule("constant", 32))
    f = bisr(w, 32, "prefix")
    assert multi_error(f.B, f.C, ParticipationSchema.single()) == pytest.approx(mean_se(f))
    one = ParticipationSchema.minsep(32, 32)
    assert one.k == 1
    assert multi_error(f.B, f.C, one) == pytest.approx(mean_se(factorize(w, "f")), rel=1e-12)


def test_multi_error_oracle():
    w = build_workload(make_schedule("exponential", 16, 0.1))
    f = bisr(w, 4, "prefix")
    schema = ParticipationSchema.minsep(16, 4, 4)
    c = f.C.array
    expected = np.linalg.norm(f.B.array) / 4 * brute_force(c, 4, 4)
    assert multi_error(f.B, f.C, schema, "exact") == pytest.approx(expected, rel=1e-12)


def test_evaluate_and_scale():
    f = factorize(build_workload(make_schedule("linear", 32, 0.2)), "e")
    rep = evaluate(f, ParticipationSchema.minsep(32, 8))
    assert rep.multi_error is not None and rep.strategy == "lr_aware"
    assert dp_scale(rep, 1, 1) == rep
    doubled = dp_scale(rep, 1, 2)
    assert doubled.maxse == pytest.approx(2 * rep.maxse)
    assert dp_scale(rep, 2, 0.5).meanse == pytest.approx(rep.meanse)
    with pytest.raises(ValueError):
        dp_scale(rep, 0, 1)
