import numpy as np
import pytest
import scipy.sparse as sp

from defective_flow.exceptions import ShapeError, SingularDiagonalError, SingularL33Error
from defective_flow.sparsecore import (BlockVector, DenseLU, as_csr, axpy, dense_lu_solve,
                                       diag_inverse, dot, identity, is_canonical_csr, norm2,
                                       scaled_triple_product, spmv)


class TestSpmv:
    def test_identity(self):
        assert np.array_equal(spmv(identity(3), np.array([1.0, 2, 3])), [1, 2, 3])

    def test_zero_matrix(self):
        assert np.array_equal(spmv(sp.csr_matrix((2, 2)), np.array([5.0, 7])), [0, 0])

    def test_hand_product(self):
        assert np.array_equal(spmv(np.array([[2.0, 0], [1, 3]]), np.ones(2)), [2, 4])

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            spmv(identity(3), np.ones(4))

    def test_matches_dense_oracle(self, rng):
        for n in (1, 17, 200):
            A = sp.random(n, n, density=0.1, random_state=n, format="csr")
            x = rng.standard_normal(n)
            ref = A.toarray() @ x
            assert np.linalg.norm(spmv(A, x) - ref) <= 1e-13 * max(1.0, np.linalg.norm(ref))


class TestCanonicalCSR:
    def test_duplicates_summed_and_sorted(self):
        A = sp.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [1, 1, 0])), shape=(2, 2))
        C = as_csr(A)
        assert is_canonical_csr(C)
        assert C[0, 1] == 3.0 and C.nnz == 2

    def test_explicit_zeros_kept(self):
        A = sp.csr_matrix((np.array([0.0, 1.0]), np.array([0, 1]), np.array([0, 2])), shape=(1, 2))
        assert as_csr(A).nnz == 2

    def test_float64(self):
        assert as_csr(np.eye(2, dtype=np.int32)).dtype == np.float64


class TestDiagInverse:
    def test_diagonal(self):
        assert np.allclose(diag_inverse(sp.diags([2.0, 4.0])), [0.5, 0.25])

    def test_identity(self):
        assert np.array_equal(diag_inverse(identity(5)), np.ones(5))

    def test_zero_entry_names_row(self):
        A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(SingularDiagonalError, match="1"):
            diag_inverse(A)
        try:
            diag_inverse(A)
        except SingularDiagonalError as exc:
            assert exc.row == 1

    def test_requires_square(self):
        with pytest.raises(ShapeError):
            diag_inverse(sp.csr_matrix((2, 3)))


class TestTripleProduct:
    def test_identity(self):
        I = identity(4)
        assert abs(scaled_triple_product(I, np.ones(4), I) - I).max() == 0

    def test_row_of_ones(self):
        X = sp.csr_matrix([[1.0, 1.0]])
        assert scaled_triple_product(X, np.ones(2), X).toarray() == [[2.0]]

    def test_dense_oracle(self, rng):
        X = sp.random(7, 11, density=0.4, random_state=1, format="csr")
        Y = sp.random(5, 11, density=0.4, random_state=2, format="csr")
        d = rng.uniform(0.5, 2.0, 11)
        ref = X.toarray() @ np.diag(d) @ Y.toarray().T
        assert np.allclose(scaled_triple_product(X, d, Y).toarray(), ref, rtol=0, atol=1e-14)

    def test_stokes_blocks_symmetric(self, channel_system):
        from defective_flow.sparsecore import diag_inverse as dinv
        B, K = channel_system.B, channel_system.K
        S = scaled_triple_product(B, dinv(K), B)
        ref = B.toarray() @ np.diag(dinv(K)) @ B.toarray().T
        assert np.allclose(S.toarray(), ref, atol=1e-13 * abs(ref).max())
        assert abs(S - S.T).max() <= 1e-13 * abs(S).max()

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            scaled_triple_product(identity(3), np.ones(2), identity(3))
        with pytest.raises(ShapeError):
            scaled_triple_product(identity(3), np.ones(3), identity(2))

    def test_structure_kept(self):
        # cancellation leaves an explicit zero rather than changing the pattern
        X = sp.csr_matrix([[1.0, -1.0]])
        P = scaled_triple_product(X, np.ones(2), sp.csr_matrix([[1.0, 1.0]]))
        assert P.nnz == 1 and P[0, 0] == 0.0


class TestDenseLU:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        assert np.array_equal(dense_lu_solve(np.eye(3), b), b)

    def test_permutation(self):
        assert np.allclose(dense_lu_solve(np.array([[0.0, 1], [1, 0]]), np.array([3.0, 4])), [4, 3])

    def test_duplicated_rows(self):
        with pytest.raises(SingularL33Error):
            DenseLU(np.array([[1.0, 2.0], [1.0, 2.0]]))

    def test_zero_matrix(self):
        with pytest.raises(SingularL33Error):
            DenseLU(np.zeros((2, 2)))

    def test_random_residual(self, rng):
        for n in (1, 5, 32):
            A = rng.standard_normal((n, n)) + n * np.eye(n)
            b = rng.standard_normal(n)
            x = dense_lu_solve(A, b)
            assert np.linalg.norm(A @ x - b) <= 1e-11 * np.linalg.norm(b)

    def test_solve_shape(self):
        with pytest.raises(ShapeError):
            DenseLU(np.eye(2)).solve(np.ones(3))


class TestBlas1:
    def test_dot(self):
        assert dot(np.array([1.0, 2]), np.array([3.0, 4])) == 11

    def test_norm(self):
        assert norm2(np.array([3.0, 4.0])) == 5

    def test_axpy(self):
        assert np.array_equal(axpy(2.0, np.ones(2), np.array([0.0, 1.0])), [2, 3])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            dot(np.ones(2), np.ones(3))
        with pytest.raises(ShapeError):
            axpy(1.0, np.ones(2), np.ones(3))


class TestBlockVector:
    def test_partition(self):
        v = BlockVector.from_parts(np.ones(3), 2 * np.ones(2), np.array([5.0]))
        assert len(v) == 6 and v.sizes == (3, 2, 1)
        assert np.array_equal(v.p, [2, 2]) and np.array_equal(v.lam, [5])

    def test_zeros_without_multipliers(self):
        v = BlockVector.zeros((2, 1))
        assert v.lam.size == 0 and len(v) == 3

    def test_size_mismatch(self):
        with pytest.raises(ShapeError):
            BlockVector(np.zeros(4), (2, 1, 0))

    def test_immutable(self):
        v = BlockVector.zeros((1, 1, 1))
        with pytest.raises(Exception):
            v.sizes = (3,)
