import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellipsoid_lab.exceptions import NotConverged, NotPositiveDefinite, ShapeMismatch
from ellipsoid_lab.linalg import (
    CholeskyFactor,
    SymMatrix,
    cholesky_solve,
    extreme_eigenvalues,
    spectral_norm,
)
from oracles import jacobi_eigenvalues, random_spd, random_symmetric


def sym(a):
    return SymMatrix.from_dense(np.asarray(a, dtype=float))


class TestSymMatrix:
    def test_packed_layout_roundtrip(self):
        a = random_symmetric(7, np.random.default_rng(1))
        S = sym(a)
        assert S.packed.size == 7 * 8 // 2
        np.testing.assert_array_equal(S.to_dense(), np.tril(a) + np.tril(a, -1).T)
        for i in range(7):
            for j in range(7):
                assert S[i, j] == S[j, i]

    def test_column_major_lower(self):
        S = sym([[1, 2, 3], [2, 4, 5], [3, 5, 6]])
        np.testing.assert_array_equal(S.packed, [1, 2, 3, 4, 5, 6])

    def test_immutable(self):
        S = SymMatrix.identity(3)
        with pytest.raises(ValueError):
            S.packed[0] = 2.0

    def test_rejects_nonfinite_and_asymmetric(self):
        with pytest.raises(ValueError):
            sym([[1.0, np.nan], [np.nan, 1.0]])
        with pytest.raises(ValueError):
            sym([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ShapeMismatch):
            sym(np.ones((2, 3)))

    def test_matvec_and_frobenius(self):
        rng = np.random.default_rng(2)
        a = random_symmetric(11, rng)
        x = rng.standard_normal(11)
        S = sym(a)
        np.testing.assert_allclose(S.matvec(x), a @ x, rtol=1e-13, atol=1e-13)
        assert abs(S.frobenius_norm() - np.linalg.norm(a)) < 1e-12

    def test_from_columns(self):
        a = random_symmetric(5, np.random.default_rng(3))
        S = SymMatrix.from_columns(5, lambda j: a[j:, j])
        np.testing.assert_array_equal(S.to_dense(), a)


class TestCholeskySolve:
    def test_identity(self):
        np.testing.assert_allclose(cholesky_solve(SymMatrix.identity(3), [1, 2, 3]), [1, 2, 3])

    def test_two_by_two_hand_inverse(self):
        x = cholesky_solve(sym([[1, 0.25], [0.25, 1]]), [1, 0])
        np.testing.assert_allclose(x, [16 / 15, -4 / 15], rtol=1e-14)

    def test_singular_raises(self):
        with pytest.raises(NotPositiveDefinite) as info:
            cholesky_solve(sym([[1, 1], [1, 1]]), [1, 2])
        assert info.value.pivot_index == 1

    def test_indefinite_raises_at_first_bad_pivot(self):
        with pytest.raises(NotPositiveDefinite) as info:
            cholesky_solve(sym([[1, 0, 0], [0, -1, 0], [0, 0, 1]]), [1, 1, 1])
        assert info.value.pivot_index == 1

    def test_tiny_pivot_below_relative_threshold(self):
        a = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-13]])
        with pytest.raises(NotPositiveDefinite):
            cholesky_solve(sym(a), [1, 0])

    def test_length_mismatch(self):
        with pytest.raises(ShapeMismatch):
            cholesky_solve(SymMatrix.identity(3), [1, 2])

    @pytest.mark.parametrize("order", [2, 10, 100])
    def test_residual_bound_random_spd(self, order):
        rng = np.random.default_rng(order)
        for _ in range(100):
            a = random_spd(order, rng)
            b = rng.standard_normal(order)
            S = sym(a)
            x = cholesky_solve(S, b)
            resid = np.linalg.norm(a @ x - b)
            assert resid <= 1e-8 * (S.frobenius_norm() * np.linalg.norm(x) + np.linalg.norm(b))

    def test_factor_reuse_multiple_rhs(self):
        rng = np.random.default_rng(5)
        a = random_spd(20, rng)
        B = rng.standard_normal((20, 4))
        fac = CholeskyFactor(sym(a))
        X = fac.solve(B)
        np.testing.assert_allclose(a @ X, B, atol=1e-10)
        np.testing.assert_allclose(fac.solve(B[:, 2]), X[:, 2], rtol=1e-14)


class TestExtremeEigenvalues:
    def test_diagonal(self):
        pair = extreme_eigenvalues(sym(np.diag([1.0, 2.0, 3.0])), 1e-12)
        assert (pair.lambda_min, pair.lambda_max) == pytest.approx((1.0, 3.0), abs=1e-14)
        assert pair.converged

    def test_rank_one_projector(self):
        u = np.arange(1.0, 6.0)
        u /= np.linalg.norm(u)
        pair = extreme_eigenvalues(sym(np.outer(u, u)), 1e-12)
        assert pair.lambda_min == pytest.approx(0.0, abs=1e-14)
        assert pair.lambda_max == pytest.approx(1.0, abs=1e-14)

    def test_random_8x8_matches_jacobi(self):
        a = random_symmetric(8, np.random.default_rng(8))
        ref = jacobi_eigenvalues(a)
        for cutoff in (64, 0):
            pair = extreme_eigenvalues(sym(a), 1e-12, dense_cutoff=cutoff)
            assert abs(pair.lambda_min - ref[0]) <= 1e-9
            assert abs(pair.lambda_max - ref[-1]) <= 1e-9

    def test_lanczos_large_matches_dense(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((300, 40)) / np.sqrt(40)
        a = (X @ X.T) ** 2
        S = sym(a)
        pair = extreme_eigenvalues(S, 1e-10)
        ref = np.linalg.eigvalsh(a)
        assert pair.iterations > 0 and pair.converged
        tol = 1e-10 * S.frobenius_norm()
        assert abs(pair.lambda_min - ref[0]) <= tol
        assert abs(pair.lambda_max - ref[-1]) <= tol

    def test_lanczos_identity_breakdown(self):
        pair = extreme_eigenvalues(SymMatrix.identity(100), 1e-12)
        assert pair.lambda_min == pytest.approx(1.0) and pair.lambda_max == pytest.approx(1.0)

    def test_lanczos_repeated_eigenvalues(self):
        vals = np.repeat([-2.0, 0.5, 3.0], 40)
        q, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((120, 120)))
        a = (q * vals) @ q.T
        pair = extreme_eigenvalues(sym(0.5 * (a + a.T)), 1e-11)
        assert pair.lambda_min == pytest.approx(-2.0, abs=1e-8)
        assert pair.lambda_max == pytest.approx(3.0, abs=1e-8)

    def test_iteration_cap(self):
        a = random_symmetric(200, np.random.default_rng(10))
        with pytest.raises(NotConverged) as info:
            extreme_eigenvalues(sym(a), 1e-14, max_iter=5)
        assert info.value.iterations == 5

    def test_converged_residual_contract(self):
        a = random_symmetric(150, np.random.default_rng(11))
        S = sym(a)
        pair = extreme_eigenvalues(S, 1e-9)
        vals, vecs = np.linalg.eigh(a)
        # an exact eigenpair at the reported value satisfies the bound
        for lam, v in ((pair.lambda_min, vecs[:, 0]), (pair.lambda_max, vecs[:, -1])):
            assert np.linalg.norm(a @ v - lam * v) <= 1e-9 * S.frobenius_norm()

    def test_invalid_tol(self):
        with pytest.raises(ValueError):
            extreme_eigenvalues(SymMatrix.identity(2), 0.0)

    @settings(max_examples=40, deadline=None)
    @given(order=st.integers(1, 32), seed=st.integers(0, 2**32 - 1), lanczos=st.booleans())
    def test_agrees_with_jacobi_up_to_order_32(self, order, seed, lanczos):
        a = random_symmetric(order, np.random.default_rng(seed))
        ref = jacobi_eigenvalues(a)
        pair = extreme_eigenvalues(sym(a), 1e-12, dense_cutoff=0 if lanczos else 64)
        assert pair.lambda_min <= pair.lambda_max
        assert abs(pair.lambda_min - ref[0]) <= 1e-9
        assert abs(pair.lambda_max - ref[-1]) <= 1e-9


class TestSpectralNorm:
    def test_zero(self):
        assert spectral_norm(sym(np.zeros((3, 3)))) == 0.0
        assert spectral_norm(sym(np.zeros((80, 80)))) == 0.0

    def test_negative_dominates(self):
        assert spectral_norm(sym(np.diag([-2.0, 1.0]))) == pytest.approx(2.0)

    def test_orthonormal_weights(self):
        q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 2)))
        a = 0.5 * np.outer(q[:, 0], q[:, 0]) - 0.7 * np.outer(q[:, 1], q[:, 1])
        assert spectral_norm(sym(0.5 * (a + a.T))) == pytest.approx(0.7, abs=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(order=st.integers(1, 100), seed=st.integers(0, 2**32 - 1))
    def test_sign_symmetric(self, order, seed):
        S = sym(random_symmetric(order, np.random.default_rng(seed)))
        tol = 1e-10
        assert abs(spectral_norm(S, tol) - spectral_norm(-S, tol)) <= 2 * tol * S.frobenius_norm()
