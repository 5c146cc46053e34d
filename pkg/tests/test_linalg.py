import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdwave.errors import NotPositiveDefiniteError, ShapeError, SingularMatrixError
from sdwave.fem import SymTridiagonal, assemble_mass, assemble_stiffness, build_mesh
from sdwave.linalg import DenseSym, TridiagFactor, gen_sym_eig, solve_dense, solve_sym_tridiag


def random_spd_tridiag(rng, n):
    off = rng.uniform(-1, 1, n - 1)
    pad = np.concatenate([[0.0], np.abs(off)]) + np.concatenate([np.abs(off), [0.0]])
    return SymTridiagonal(pad + rng.uniform(0.1, 2.0, n), off)


class TestTridiagonalSolve:
    def test_identity(self):
        b = np.array([3.0, -1.0, 2.5])
        x = solve_sym_tridiag(SymTridiagonal(np.ones(3), np.zeros(2)), b)
        np.testing.assert_array_equal(x, b)

    def test_two_by_two(self):
        x = solve_sym_tridiag(SymTridiagonal(np.array([4.0, 4.0]), np.array([-1.0])), [1.0, 0.0])
        np.testing.assert_allclose(x, [4 / 15, 1 / 15], rtol=1e-15)

    def test_random_against_dense_oracle(self):
        rng = np.random.default_rng(11)
        A = random_spd_tridiag(rng, 50)
        b = rng.standard_normal(50)
        np.testing.assert_allclose(solve_sym_tridiag(A, b), solve_dense(A.to_dense(), b),
                                   rtol=1e-10, atol=1e-12)

    @given(st.integers(1, 200), st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_agrees_with_dense_and_residual(self, n, seed):
        rng = np.random.default_rng(seed)
        A = random_spd_tridiag(rng, n)
        b = rng.standard_normal(n)
        x = solve_sym_tridiag(A, b)
        np.testing.assert_allclose(x, solve_dense(A.to_dense(), b), rtol=1e-9, atol=1e-9)
        res = np.abs(A @ x - b).max()
        assert res <= 1e-10 * (A.inf_norm() * np.abs(x).max() + np.abs(b).max())

    def test_batch_columns_are_independent(self):
        rng = np.random.default_rng(2)
        A = random_spd_tridiag(rng, 9)
        B = rng.standard_normal((9, 4))
        X = TridiagFactor(A).solve(B)
        for j in range(4):
            np.testing.assert_array_equal(X[:, j], solve_sym_tridiag(A, B[:, j]))

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError):
            solve_sym_tridiag(SymTridiagonal(np.array([1.0, 1.0]), np.array([2.0])), [1.0, 1.0])

    def test_zero_pivot(self):
        with pytest.raises(NotPositiveDefiniteError):
            solve_sym_tridiag(SymTridiagonal(np.array([0.0, 1.0]), np.array([0.0])), [1.0, 1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            solve_sym_tridiag(SymTridiagonal(np.ones(3), np.zeros(2)), np.ones(4))

    def test_input_not_modified(self):
        A = SymTridiagonal(np.full(3, 2.0), np.full(2, -1.0))
        b = np.array([1.0, 2.0, 3.0])
        solve_sym_tridiag(A, b)
        np.testing.assert_array_equal(b, [1.0, 2.0, 3.0])


class TestGeneralizedEigen:
    def test_identity_pencil(self):
        M = assemble_mass(build_mesh(6))
        dec = gen_sym_eig(M, M)
        np.testing.assert_allclose(dec.eigvals, 1.0, rtol=1e-12)
        V = dec.eigvecs
        np.testing.assert_allclose(V.T @ M.to_dense() @ V, np.eye(5), atol=1e-12)

    def test_scalar(self):
        dec = gen_sym_eig(SymTridiagonal(np.array([4.0]), np.array([])),
                          SymTridiagonal(np.array([1 / 3]), np.array([])))
        assert dec.eigvals[0] == pytest.approx(12.0, rel=1e-14)

    @pytest.mark.parametrize("n", [8, 31])
    def test_closed_form_eigenvalues(self, n):
        mesh = build_mesh(n)
        h = mesh.h
        j = np.arange(1, n)
        exact = 6 / h ** 2 * (1 - np.cos(j * np.pi * h)) / (2 + np.cos(j * np.pi * h))
        dec = gen_sym_eig(assemble_stiffness(mesh), assemble_mass(mesh))
        np.testing.assert_allclose(dec.eigvals, exact, rtol=1e-12)

    @given(st.integers(2, 60))
    @settings(max_examples=20, deadline=None)
    def test_residuals_and_reconstruction(self, n):
        mesh = build_mesh(n)
        S, M = assemble_stiffness(mesh), assemble_mass(mesh)
        dec = gen_sym_eig(S, M)
        Sd, Md, V, lam = S.to_dense(), M.to_dense(), dec.eigvecs, dec.eigvals
        assert np.all(np.diff(lam) > 0) and lam[0] > 0
        res = np.linalg.norm(Sd @ V - Md @ V * lam, axis=0) / (lam * np.linalg.norm(Md @ V, axis=0))
        assert res.max() <= 1e-10
        np.testing.assert_allclose(V.T @ Md @ V, np.eye(n - 1), atol=1e-10)
        recon = Md @ V @ np.diag(lam) @ V.T @ Md
        assert np.linalg.norm(recon - Sd) / np.linalg.norm(Sd) <= 1e-9

    def test_indefinite_mass(self):
        with pytest.raises(NotPositiveDefiniteError):
            gen_sym_eig(SymTridiagonal(np.ones(2), np.zeros(1)),
                        SymTridiagonal(np.array([1.0, -1.0]), np.zeros(1)))

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            gen_sym_eig(assemble_stiffness(build_mesh(4)), assemble_mass(build_mesh(5)))


class TestDense:
    def test_identity(self):
        b = np.array([1.0, -2.0, 0.5])
        np.testing.assert_array_equal(solve_dense(DenseSym(np.eye(3)), b), b)

    def test_two_by_two(self):
        np.testing.assert_allclose(solve_dense(DenseSym([[2.0, 1.0], [1.0, 2.0]]), [3.0, 3.0]),
                                   [1.0, 1.0], rtol=1e-15)

    def test_random_spd_residual(self):
        rng = np.random.default_rng(20)
        B = rng.standard_normal((20, 20))
        A = B @ B.T + 20 * np.eye(20)
        b = rng.standard_normal(20)
        x = solve_dense(DenseSym(A), b)
        assert np.abs(A @ x - b).max() <= 1e-10 * np.abs(b).max()

    def test_needs_pivoting(self):
        A = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(solve_dense(DenseSym(A), [2.0, 3.0]), [3.0, 2.0])

    def test_singular(self):
        with pytest.raises(SingularMatrixError):
            solve_dense(DenseSym([[1.0, 2.0], [2.0, 4.0]]), [1.0, 1.0])

    def test_asymmetric_rejected(self):
        with pytest.raises(ShapeError):
            DenseSym([[1.0, 2.0], [0.0, 1.0]])

    def test_multiple_right_hand_sides(self):
        A = DenseSym([[4.0, 1.0], [1.0, 3.0]])
        B = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(solve_dense(A, B), np.linalg.inv(A.entries), rtol=1e-14)
