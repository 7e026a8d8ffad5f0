import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlmtl.kernels import KernelSpec, cross_gram, cross_gram_matrix, gram, kernel_eval

GAUSS = KernelSpec("gaussian", 1.0)
LIN = KernelSpec("linear")


class TestKernelEval:
    def test_zero_distance_gives_one(self):
        assert kernel_eval(GAUSS, [0.3, -1.2], [0.3, -1.2]) == 1.0

    def test_value_at_one_bandwidth(self):
        # squared distance equal to sigma^2 -> exp(-1)
        spec = KernelSpec("gaussian", 2.0)
        val = kernel_eval(spec, [0.0], [2.0])
        assert val == pytest.approx(math.exp(-1.0), abs=1e-15)

    def test_linear_inner_product(self):
        assert kernel_eval(LIN, [1.0, 2.0], [3.0, 4.0]) == 11.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            kernel_eval(GAUSS, [1.0], [1.0, 2.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            kernel_eval(GAUSS, [np.nan], [0.0])

    @given(st.lists(st.floats(-6, 6), min_size=1, max_size=4),
           st.lists(st.floats(-6, 6), min_size=1, max_size=4))
    @settings(max_examples=100, deadline=None)
    def test_gaussian_range(self, a, b):
        # domain kept small enough that exp() cannot underflow to 0
        n = min(len(a), len(b))
        v = kernel_eval(GAUSS, a[:n], b[:n])
        assert 0.0 < v <= 1.0

    @given(st.floats(-8, 8), st.floats(0.1, 4))
    @settings(max_examples=100, deadline=None)
    def test_linear_bilinearity(self, x, scale):
        xp = [0.7, -0.2]
        lhs = kernel_eval(LIN, [scale * x, scale * 2.0], xp)
        rhs = scale * kernel_eval(LIN, [x, 2.0], xp)
        assert lhs == pytest.approx(rhs, abs=1e-10)


class TestGram:
    def test_single_point(self):
        X = np.array([[0.5, 0.5]])
        assert gram(GAUSS, X).shape == (1, 1)
        assert gram(GAUSS, X)[0, 0] == 1.0
        assert gram(LIN, X)[0, 0] == 0.5

    def test_duplicate_points(self):
        K = gram(GAUSS, [[1.0, 1.0], [1.0, 1.0]])
        assert np.array_equal(K, np.ones((2, 2)))

    def test_positive_semidefinite(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(5, 3))
        K = gram(GAUSS, X)
        assert np.linalg.eigvalsh(K).min() >= -1e-10

    def test_bitwise_symmetry(self):
        rng = np.random.default_rng(1)
        for spec in (GAUSS, LIN, KernelSpec("gaussian", 0.37)):
            X = rng.normal(size=(300, 4))  # spans several distance blocks
            K = gram(spec, X)
            assert np.array_equal(K, K.T)

    def test_gaussian_diagonal_exactly_one(self):
        rng = np.random.default_rng(2)
        K = gram(GAUSS, rng.normal(size=(40, 2)))
        assert np.array_equal(np.diag(K), np.ones(40))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            gram(GAUSS, [[np.inf, 0.0]])


class TestCrossGram:
    def test_self_similarity_first_entry(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(6, 2))
        k = cross_gram(GAUSS, X, X[0])
        assert k[0] == 1.0

    def test_single_row(self):
        X = np.array([[1.0, 0.0]])
        x = np.array([0.0, 1.0])
        assert cross_gram(GAUSS, X, x)[0] == kernel_eval(GAUSS, x, X[0])

    @pytest.mark.parametrize("spec", [GAUSS, LIN])
    def test_matches_gram_rows(self, spec):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(150, 3))
        K = gram(spec, X)
        for i in range(X.shape[0]):
            np.testing.assert_allclose(cross_gram(spec, X, X[i]), K[i],
                                       rtol=0, atol=1e-12)

    def test_matrix_form_matches_vector_form(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(20, 2))
        Q = rng.normal(size=(7, 2))
        M = cross_gram_matrix(GAUSS, X, Q)
        for j in range(7):
            np.testing.assert_array_equal(M[:, j], cross_gram(GAUSS, X, Q[j]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            cross_gram(GAUSS, np.zeros((3, 2)), [1.0, 2.0, 3.0])


class TestSpec:
    def test_json_round_trip(self):
        for spec in (GAUSS, LIN, KernelSpec("gaussian", 0.05)):
            assert KernelSpec.from_dict(spec.to_dict()) == spec

    def test_bad_bandwidth(self):
        for bw in (0.0, -1.0, np.nan, None):
            with pytest.raises(ValueError):
                KernelSpec("gaussian", bw)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            KernelSpec("laplace", 1.0)
