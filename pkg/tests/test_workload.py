import numpy as np

from lrmf.schedules import KINDS, make_schedule
from lrmf.trimatrix import prefix_sum_matrix
from lrmf.workload import apply_workload, build_workload


def test_constant_is_prefix_sum():
    w = build_workload(make_schedule("constant", 3))
    np.testing.assert_array_equal(w.a_chi.array, prefix_sum_matrix(3).array)


def test_exponential_columns():
    w = build_workload(make_schedule("exponential", 3, 0.25))
    np.testing.assert_allclose(w.a_chi.array, [[1, 0, 0], [1, 0.5, 0], [1, 0.5, 0.25]])


def test_toeplitz_first_column_is_chi():
    for kind in KINDS:
        s = make_schedule(kind, 12, 1.0 if kind == "constant" else 0.3)
        w = build_workload(s)
        np.testing.assert_array_equal(w.a_toep.to_dense()[:, 0], s.values)
        assert w.n == 12


def test_apply_workload_matches_dense():
    w = build_workload(make_schedule("cosine", 20, 0.1))
    m = np.random.default_rng(0).standard_normal((20, 3))
    np.testing.assert_allclose(apply_workload(w.chi, m), w.a_chi.array @ m, atol=1e-13)
    v = m[:, 0]
    np.testing.assert_allclose(apply_workload(w.chi, v), w.a_chi.array @ v, atol=1e-13)
