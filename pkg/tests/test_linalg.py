import numpy as np
import pytest

from kgalign.errors import NumericError
from kgalign.linalg import (
    SparseMatrix,
    degree_normalize,
    row_l2_normalize,
    scatter_add_rows,
    spmm,
)


def test_identity_spmm_returns_operand():
    b = np.arange(12, dtype=float).reshape(4, 3)
    assert np.array_equal(spmm(SparseMatrix.identity(4), b), b)


def test_all_ones_spmm_hand_sum():
    a = SparseMatrix.from_dense(np.ones((2, 2)))
    out = spmm(a, np.array([[1.0], [3.0]]))
    assert out.tolist() == [[4.0], [4.0]]


def test_spmm_matches_dense_reference():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n, m, d = rng.integers(1, 51), rng.integers(1, 51), rng.integers(1, 8)
        dense = np.where(rng.random((n, m)) < 0.2, rng.normal(size=(n, m)), 0.0)
        b = rng.normal(size=(m, d))
        expected = dense @ b  # dense brute-force oracle
        got = spmm(SparseMatrix.from_dense(dense), b)
        assert np.allclose(got, expected, rtol=1e-10, atol=1e-12)


def test_spmm_dimension_mismatch():
    a = SparseMatrix.identity(3)
    with pytest.raises(ValueError, match="mismatch"):
        spmm(a, np.ones((4, 2)))


def test_csr_canonicalization_from_shuffled_duplicates():
    rng = np.random.default_rng(1)
    rows = np.array([0, 1, 1, 0, 2, 1, 0])
    cols = np.array([1, 2, 2, 1, 0, 0, 2])
    vals = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
    order = rng.permutation(len(rows))
    shuffled = SparseMatrix.from_coo(rows[order], cols[order], vals[order], (3, 3))
    presummed = SparseMatrix.from_coo(
        [0, 0, 1, 1, 2], [1, 2, 0, 2, 0], [5.0, 7.0, 6.0, 5.0, 5.0], (3, 3)
    )
    assert shuffled == presummed
    # strictly increasing column indices within each row
    for i in range(3):
        lo, hi = shuffled.row_offsets[i], shuffled.row_offsets[i + 1]
        cols_i = shuffled.col_indices[lo:hi]
        assert np.all(np.diff(cols_i) > 0)


def test_row_l2_normalize_345():
    out = row_l2_normalize(np.array([[3.0, 4.0]]))
    assert np.allclose(out, [[0.6, 0.8]])


def test_row_l2_normalize_zero_row_unchanged():
    out = row_l2_normalize(np.array([[0.0, 0.0]]))
    assert out.tolist() == [[0.0, 0.0]]


def test_row_l2_normalize_random_norms():
    rng = np.random.default_rng(2)
    m = rng.normal(size=(40, 7))
    out = row_l2_normalize(m)
    assert np.allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-6)


def test_degree_normalize_row_uniform():
    a = SparseMatrix.from_dense(np.ones((2, 2)))
    out = degree_normalize(a, "row").to_dense()
    assert np.allclose(out, [[0.5, 0.5], [0.5, 0.5]])


def test_degree_normalize_symmetric_hand():
    # degrees are both 2, so every entry is 1 / sqrt(2 * 2)
    a = SparseMatrix.from_dense(np.ones((2, 2)))
    out = degree_normalize(a, "symmetric").to_dense()
    assert np.allclose(out, [[0.5, 0.5], [0.5, 0.5]])


def test_degree_normalize_identity_fixed_point():
    a = SparseMatrix.identity(4)
    for mode in ("row", "symmetric"):
        assert np.allclose(degree_normalize(a, mode).to_dense(), np.eye(4))


def test_degree_normalize_row_sums_one():
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(2, 30))
        dense = np.where(rng.random((n, n)) < 0.3, rng.random((n, n)), 0.0)
        dense += np.eye(n)  # self-loops keep degrees positive
        out = degree_normalize(SparseMatrix.from_dense(dense), "row")
        assert np.allclose(out.row_sums(), 1.0, atol=1e-9)


def test_degree_normalize_symmetric_matches_dense_reference():
    rng = np.random.default_rng(7)
    for _ in range(10):
        n = int(rng.integers(2, 25))
        dense = np.where(rng.random((n, n)) < 0.3, rng.random((n, n)), 0.0)
        dense += np.eye(n)
        deg = dense.sum(axis=1)
        d_inv_sqrt = np.diag(1.0 / np.sqrt(deg))
        expected = d_inv_sqrt @ dense @ d_inv_sqrt
        got = degree_normalize(SparseMatrix.from_dense(dense), "symmetric").to_dense()
        assert np.allclose(got, expected, atol=1e-12)


def test_degree_normalize_zero_degree_errors():
    a = SparseMatrix.from_coo([0], [0], [1.0], (2, 2))  # row 1 empty
    with pytest.raises(NumericError, match="self-loop"):
        degree_normalize(a, "row")


def test_degree_normalize_requires_square():
    a = SparseMatrix.from_coo([0], [0], [1.0], (2, 3))
    with pytest.raises(ValueError, match="square"):
        degree_normalize(a, "row")


def test_transpose_roundtrip():
    rng = np.random.default_rng(4)
    dense = np.where(rng.random((5, 7)) < 0.4, rng.normal(size=(5, 7)), 0.0)
    a = SparseMatrix.from_dense(dense)
    assert np.allclose(a.transpose().to_dense(), dense.T)
    assert a.transpose() is a.transpose()  # cached


def test_scatter_add_rows_matches_add_at():
    rng = np.random.default_rng(5)
    for m in (10, 5000):  # covers both implementation paths
        idx = rng.integers(0, 50, m)
        rows = rng.normal(size=(m, 3))
        out1 = np.zeros((50, 3))
        out2 = np.zeros((50, 3))
        scatter_add_rows(out1, idx, rows)
        np.add.at(out2, idx, rows)
        assert np.allclose(out1, out2, rtol=1e-12, atol=1e-12)


def test_spmm_deterministic():
    rng = np.random.default_rng(6)
    dense = np.where(rng.random((30, 30)) < 0.2, rng.normal(size=(30, 30)), 0.0)
    a = SparseMatrix.from_dense(dense)
    b = rng.normal(size=(30, 5))
    first = spmm(a, b)
    for _ in range(3):
        assert np.array_equal(spmm(a, b), first)
