import numpy as np
import pytest
import scipy.sparse as sp

from ensheat.sparse import (
    NotSpdError,
    add_scaled,
    cg_solve,
    csr_from_triplets,
    factorize_spd,
    matvec,
    mm_read,
    mm_write,
    solve,
)


def random_spd(n, rng, density=0.6):
    D = rng.standard_normal((n, n))
    D[rng.random((n, n)) > density] = 0.0
    S = D @ D.T + n * np.eye(n)
    return sp.csr_array(sp.coo_array(S)), S


class TestCsrFromTriplets:
    def test_duplicates_summed(self):
        A = csr_from_triplets(2, [(0, 0, 1.0), (0, 0, 2.0)])
        assert A.nnz == 1
        assert A[0, 0] == 3.0

    def test_empty(self):
        A = csr_from_triplets(4, [])
        assert A.shape == (4, 4)
        assert A.nnz == 0
        assert len(A.indptr) == 5

    def test_against_dense_accumulation(self):
        rng = np.random.default_rng(42)
        rows = rng.integers(0, 5, 30)
        cols = rng.integers(0, 5, 30)
        vals = rng.standard_normal(30)
        dense = np.zeros((5, 5))
        for i, j, v in zip(rows, cols, vals):
            dense[i, j] += v
        A = csr_from_triplets(5, rows, cols, vals)
        assert np.array_equal(A.toarray(), dense)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            csr_from_triplets(2, [(0, 2, 1.0)])
        with pytest.raises(ValueError):
            csr_from_triplets(2, [(-1, 0, 1.0)])


class TestAddScaled:
    def test_identity_combination(self):
        A = csr_from_triplets(3, [(0, 1, 2.0), (2, 2, -1.0)])
        B = csr_from_triplets(3, [(1, 1, 5.0)])
        C = add_scaled(A, B, 1.0, 0.0)
        assert np.array_equal(C.toarray(), A.toarray())

    def test_cancellation(self):
        A = csr_from_triplets(3, [(0, 1, 2.0), (1, 0, 3.0)])
        C = add_scaled(A, A, 1.0, -1.0)
        assert np.abs(C.toarray()).max() <= 1e-16

    def test_against_dense(self):
        rng = np.random.default_rng(3)
        A = sp.csr_array(sp.random(6, 6, density=0.4, random_state=1))
        B = sp.csr_array(sp.random(6, 6, density=0.4, random_state=2))
        C = add_scaled(A, B, 0.3, -1.7)
        ref = 0.3 * A.toarray() - 1.7 * B.toarray()
        assert np.abs(C.toarray() - ref).max() <= 1e-15

    def test_shape_mismatch(self):
        A = csr_from_triplets(3, [])
        B = csr_from_triplets(4, [])
        with pytest.raises(ValueError):
            add_scaled(A, B, 1.0, 1.0)


class TestMatvec:
    def test_identity(self):
        I = sp.csr_array(sp.eye(5))
        x = np.arange(5.0)
        assert np.array_equal(matvec(I, x), x)

    def test_zero_matrix(self):
        A = csr_from_triplets(4, [])
        assert np.array_equal(matvec(A, np.ones(4)), np.zeros(4))

    def test_against_dense(self):
        rng = np.random.default_rng(8)
        dense = rng.standard_normal((8, 8))
        A = sp.csr_array(sp.coo_array(dense))
        x = rng.standard_normal(8)
        assert np.abs(matvec(A, x) - dense @ x).max() <= 1e-14

    def test_dimension_mismatch(self):
        A = csr_from_triplets(3, [])
        with pytest.raises(ValueError):
            matvec(A, np.ones(4))


class TestFactorization:
    def test_identity(self):
        A = sp.csr_array(sp.eye(6))
        f = factorize_spd(A)
        L = f.lower_factor().toarray()
        assert np.array_equal(L, np.eye(6))

    def test_two_by_two_hand_cholesky(self):
        # [[4,2],[2,3]] factors as L = [[2,0],[1,sqrt(2)]].
        A = csr_from_triplets(2, [0, 0, 1, 1], [0, 1, 0, 1], [4.0, 2.0, 2.0, 3.0])
        f = factorize_spd(A, ordering="natural")
        L = f.lower_factor().toarray()
        assert np.abs(L - [[2.0, 0.0], [1.0, np.sqrt(2.0)]]).max() <= 1e-15

    def test_negative_diagonal_rejected(self):
        A = csr_from_triplets(3, [0, 1, 2], [0, 1, 2], [1.0, -1.0, 1.0])
        with pytest.raises(NotSpdError) as err:
            factorize_spd(A)
        assert "index" in str(err.value)

    def test_indefinite_rejected(self):
        # SPD diagonal but indefinite overall.
        A = csr_from_triplets(2, [0, 0, 1, 1], [0, 1, 0, 1], [1.0, 2.0, 2.0, 1.0])
        with pytest.raises(NotSpdError):
            factorize_spd(A, ordering="natural")

    def test_asymmetric_rejected(self):
        A = csr_from_triplets(2, [(0, 1, 1.0), (0, 0, 1.0), (1, 1, 1.0)])
        with pytest.raises(ValueError):
            factorize_spd(A)

    def test_reconstruction(self):
        rng = np.random.default_rng(5)
        A, S = random_spd(12, rng)
        f = factorize_spd(A)
        L = f.lower_factor().toarray()
        P = np.eye(12)[f.perm]
        assert np.abs(P @ S @ P.T - L @ L.T).max() <= 1e-10 * np.abs(S).max()


class TestSolve:
    def test_solution_of_ones(self):
        rng = np.random.default_rng(7)
        A, S = random_spd(10, rng)
        b = A @ np.ones(10)
        x = solve(factorize_spd(A), b)
        assert np.abs(x - 1.0).max() <= 1e-10

    def test_identical_columns_bit_equal(self):
        rng = np.random.default_rng(9)
        A, _ = random_spd(15, rng)
        b = rng.standard_normal(15)
        B = np.tile(b[:, None], (1, 4))
        X = solve(factorize_spd(A), B)
        for j in range(1, 4):
            assert np.array_equal(X[:, 0], X[:, j])

    def test_multi_rhs_against_dense_oracle(self):
        rng = np.random.default_rng(11)
        A, S = random_spd(10, rng)
        B = rng.standard_normal((10, 4))
        X = solve(factorize_spd(A), B)
        assert np.abs(X - np.linalg.solve(S, B)).max() <= 1e-9

    def test_multi_rhs_bit_identical_to_single(self):
        rng = np.random.default_rng(13)
        A, _ = random_spd(40, rng)
        f = factorize_spd(A)
        B = rng.standard_normal((40, 7))
        X = f.solve(B)
        for j in range(7):
            assert np.array_equal(f.solve(B[:, j]), X[:, j])

    def test_repeat_solves_bit_identical(self):
        rng = np.random.default_rng(17)
        A, _ = random_spd(20, rng)
        f = factorize_spd(A)
        b = rng.standard_normal(20)
        assert np.array_equal(f.solve(b), f.solve(b))

    def test_ordering_does_not_change_answers(self):
        rng = np.random.default_rng(19)
        A, _ = random_spd(25, rng)
        b = rng.standard_normal(25)
        x_rcm = solve(factorize_spd(A, ordering="rcm"), b)
        x_nat = solve(factorize_spd(A, ordering="natural"), b)
        assert np.abs(x_rcm - x_nat).max() <= 1e-10

    def test_dimension_mismatch(self):
        A = sp.csr_array(sp.eye(3))
        with pytest.raises(ValueError):
            factorize_spd(A).solve(np.ones(4))


class TestCg:
    def test_identity_one_iteration(self):
        A = sp.csr_array(sp.eye(8))
        res = cg_solve(A, np.arange(1.0, 9.0))
        assert res.converged
        assert res.iterations == 1

    def test_matches_cholesky(self):
        rng = np.random.default_rng(23)
        A, _ = random_spd(30, rng)
        b = rng.standard_normal(30)
        x_chol = solve(factorize_spd(A), b)
        res = cg_solve(A, b, tol=1e-12)
        assert res.converged
        assert np.abs(res.x - x_chol).max() <= 1e-9

    def test_zero_rhs(self):
        A = sp.csr_array(sp.eye(5))
        res = cg_solve(A, np.zeros(5))
        assert res.iterations == 0
        assert np.array_equal(res.x, np.zeros(5))

    def test_nonconvergence_flagged(self):
        rng = np.random.default_rng(29)
        A, _ = random_spd(30, rng)
        res = cg_solve(A, rng.standard_normal(30), tol=1e-14, max_iter=2)
        assert not res.converged
        assert res.relative_residual > 0


def test_matrixmarket_roundtrip(tmp_path):
    rng = np.random.default_rng(31)
    A = sp.csr_array(sp.random(7, 7, density=0.3, random_state=4))
    path = tmp_path / "debug.mtx"
    mm_write(path, A)
    B = mm_read(path)
    assert np.abs(A.toarray() - B.toarray()).max() <= 1e-12
