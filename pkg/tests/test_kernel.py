import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hinftrack.kernel import (DimensionError, IllConditionedError, as_matrix, eig_general,
                              eig_sym, kron, solve_linear, spectral_radius, sv_max)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def square(max_n=8):
    return st.integers(1, max_n).flatmap(lambda n: arrays(float, (n, n), elements=finite))


class TestEigSym:
    def test_identity(self):
        np.testing.assert_allclose(eig_sym(np.eye(3)).eigenvalues, [1, 1, 1])

    def test_swap(self):
        np.testing.assert_allclose(eig_sym([[0, 1], [1, 0]]).eigenvalues, [-1, 1])

    def test_quadratic_root_oracle(self):
        ev = eig_sym([[1 / 9, 5 / 9], [5 / 9, 4 / 9]]).eigenvalues
        oracle = [(5 - np.sqrt(109)) / 18, (5 + np.sqrt(109)) / 18]
        np.testing.assert_allclose(ev, oracle, atol=1e-12)
        np.testing.assert_allclose(ev, [-0.302239, 0.857795], atol=5e-7)

    def test_marked_symmetric(self):
        assert eig_sym(np.eye(2)).is_real_symmetric_source

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            eig_sym([[0, 1], [0, 0]])

    def test_rejects_nonsquare(self):
        with pytest.raises(DimensionError):
            eig_sym(np.zeros((2, 3)))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            eig_sym([[np.nan, 0], [0, 1]])

    @given(arrays(float, st.integers(1, 8), elements=finite))
    def test_diag_round_trip(self, v):
        np.testing.assert_allclose(eig_sym(np.diag(v)).eigenvalues, np.sort(v), atol=1e-12)

    @given(square())
    def test_trace_equals_eigen_sum(self, M):
        S = M + M.T
        ev = eig_sym(S).eigenvalues
        assert abs(ev.sum() - np.trace(S)) <= 1e-9 * max(np.linalg.norm(S), 1.0)


class TestEigGeneral:
    def test_scalar(self):
        np.testing.assert_allclose(eig_general([[0.5]]).eigenvalues, [0.5])

    def test_leader_matrix(self):
        ev = eig_general([[1, 0, 0], [1, 1, 0], [1, 1, 0.5]]).eigenvalues
        # repeated eigenvalue 1 in a Jordan block is only sqrt(eps) accurate
        np.testing.assert_allclose(np.sort(ev.real), [0.5, 1, 1], atol=1e-7)
        np.testing.assert_allclose(ev.imag, 0, atol=1e-7)

    def test_rotation(self):
        ev = eig_general([[0, -1], [1, 0]]).eigenvalues
        np.testing.assert_allclose(sorted(ev, key=lambda z: z.imag), [-1j, 1j], atol=1e-14)

    def test_rejects_nonsquare(self):
        with pytest.raises(DimensionError):
            eig_general(np.zeros((3, 2)))

    @settings(max_examples=50)
    @given(st.integers(1, 5).flatmap(lambda n: arrays(float, (n, n), elements=st.floats(-1, 1))))
    def test_characteristic_residual(self, M):
        n = M.shape[0]
        scale = max(np.linalg.norm(M, 2), 1.0)
        for lam in eig_general(M).eigenvalues:
            assert abs(np.linalg.det(M - lam * np.eye(n))) <= 1e-7 * scale**n


class TestSpectralRadius:
    def test_zero(self):
        assert spectral_radius(np.zeros((2, 2))) == 0

    def test_diag(self):
        assert spectral_radius([[0.9, 0], [0, -0.3]]) == pytest.approx(0.9, abs=1e-15)

    def test_leader(self):
        assert spectral_radius([[1, 0, 0], [1, 1, 0], [1, 1, 0.5]]) == pytest.approx(1.0, abs=1e-7)


class TestSvMax:
    def test_identity(self):
        assert sv_max(np.eye(4)) == pytest.approx(1.0, rel=1e-14)

    def test_diag(self):
        assert sv_max([[3, 0], [0, 4]]) == pytest.approx(4.0, rel=1e-14)

    def test_golden_ratio(self):
        assert sv_max([[1, 1], [0, 1]]) == pytest.approx((1 + np.sqrt(5)) / 2, rel=1e-12)

    def test_complex(self):
        assert sv_max(np.array([[1j, 0], [0, 2]])) == pytest.approx(2.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            sv_max([[np.inf]])

    @given(st.tuples(st.integers(1, 8), st.integers(1, 8)).flatmap(
        lambda s: arrays(float, s, elements=finite)))
    def test_square_is_gram_radius(self, M):
        s = sv_max(M)
        r = spectral_radius(M.T @ M)
        assert abs(s**2 - r) <= 1e-9 * max(r, 1e-300) + 1e-300


class TestKron:
    def test_identity_scalar(self):
        np.testing.assert_array_equal(kron(np.eye(2), [[5]]), np.diag([5.0, 5.0]))

    def test_block_diag(self):
        B = np.arange(6.0).reshape(2, 3)
        K = kron(np.eye(2), B)
        np.testing.assert_array_equal(K[:2, :3], B)
        np.testing.assert_array_equal(K[2:, 3:], B)
        assert not K[:2, 3:].any() and not K[2:, :3].any()

    def test_swap(self):
        np.testing.assert_array_equal(kron([[0, 1], [1, 0]], [[2]]), [[0, 2], [2, 0]])

    @given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3),
           st.integers(1, 3), st.integers(1, 3), st.data())
    def test_mixed_product(self, a, b, c, d, e, f, data):
        el = st.floats(-3, 3)
        A = data.draw(arrays(float, (a, b), elements=el))
        C = data.draw(arrays(float, (b, c), elements=el))
        B = data.draw(arrays(float, (d, e), elements=el))
        D = data.draw(arrays(float, (e, f), elements=el))
        np.testing.assert_allclose(kron(A, B) @ kron(C, D), kron(A @ C, B @ D), atol=1e-12)


class TestSolveLinear:
    def test_identity(self):
        B = np.array([[1.0, 2], [3, 4]])
        np.testing.assert_array_equal(solve_linear(np.eye(2), B), B)

    def test_diag(self):
        np.testing.assert_allclose(solve_linear(np.diag([2.0, 4]), [2.0, 4]), [1, 1])

    def test_substitution(self):
        np.testing.assert_allclose(solve_linear([[2, 1], [1, 2]], [[3], [3]]), [[1], [1]])

    def test_singular(self):
        with pytest.raises(IllConditionedError) as info:
            solve_linear([[1, 1], [1, 1]], [1, 1])
        assert info.value.condition > 1e12

    @given(st.integers(1, 6).flatmap(lambda n: arrays(float, (n, n), elements=st.floats(-1, 1))))
    def test_residual(self, M):
        A = M + M.shape[0] * np.eye(M.shape[0])
        B = np.ones((M.shape[0], 2))
        X = solve_linear(A, B)
        assert np.linalg.norm(A @ X - B) <= 1e-9 * np.linalg.norm(A) * np.linalg.norm(X)


def test_as_matrix_shapes():
    assert as_matrix(2.0).shape == (1, 1)
    assert as_matrix([1, 2]).shape == (2, 1)
    with pytest.raises(ValueError):
        as_matrix([[1j]])
