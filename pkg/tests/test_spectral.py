"""Tests for the SVD-based exact solvers."""

import itertools

import numpy as np
import pytest

from lowrankzeros.patterns import ZeroPattern, complement_blocks, rank1_ed_degree
from lowrankzeros.spectral import (
    NonGenericSpectrumError,
    SupportError,
    best_rank1_structured,
    block_diagonal_rank_r,
    eckart_young_points,
    project_onto_pattern,
    rectangular_rank_r,
    svd_factors,
)

PAPER_U_3X4 = np.array([
    [1.0, -1.0, -2.0, -2.0],
    [1.0, 0.0, 1.0, -2.0],
    [2.0, 0.0, 0.0, 2.0],
])

PAPER_X_3X4 = np.array([
    [0.0, 0.0, -0.627896, -2.36438],
    [0.0, 0.0, -0.430261, -1.62017],
    [0.0, 0.0, 0.496139, 1.86824],
])

PAPER_U_BLOCKS = np.arange(1.0, 10.0).reshape(3, 3)

PAPER_C1 = np.array([[1.0, 2, 0], [4, 5, 0], [0, 0, 0]])
PAPER_C2 = np.array([[1.3332, 1.7455, 0], [3.8857, 5.0873, 0], [0, 0, 9.0]])
PAPER_C3 = np.array([[-0.3332, 0.2545, 0], [0.1143, -0.0873, 0], [0, 0, 9.0]])


def test_svd_diagonal():
    fac = svd_factors(np.diag([3.0, 2.0, 1.0]))
    assert np.allclose(fac.sigma, [3, 2, 1])
    assert np.allclose(np.abs(fac.A), np.eye(3), atol=1e-12)
    assert np.allclose(fac.reconstruct(), np.diag([3.0, 2.0, 1.0]), atol=1e-12)


def test_svd_zero_matrix():
    fac = svd_factors(np.zeros((2, 3)))
    assert np.allclose(fac.sigma, 0)
    assert np.allclose(fac.reconstruct(), np.zeros((2, 3)))
    assert np.allclose(fac.A @ fac.A.T, np.eye(2), atol=1e-12)
    assert np.allclose(fac.B @ fac.B.T, np.eye(3), atol=1e-12)


def test_svd_reconstruction_and_orthogonality():
    rng = np.random.default_rng(0)
    for _ in range(10):
        U = rng.standard_normal((3, 4))
        fac = svd_factors(U)
        nrm = np.linalg.norm(U)
        assert np.linalg.norm(fac.reconstruct() - U) <= 1e-12 * nrm
        assert np.linalg.norm(fac.A @ fac.A.T - np.eye(3)) <= 1e-12
        assert np.linalg.norm(fac.B @ fac.B.T - np.eye(4)) <= 1e-12
        assert np.all(np.diff(fac.sigma) <= 0)


def test_svd_sign_determinism():
    rng = np.random.default_rng(1)
    U = rng.standard_normal((4, 3))
    f1, f2 = svd_factors(U), svd_factors(U.copy())
    assert np.array_equal(f1.A, f2.A) and np.array_equal(f1.B, f2.B)
    for i in range(len(f1.sigma)):
        col = f1.A[:, i]
        first = col[np.nonzero(np.abs(col) > 1e-12)[0][0]]
        assert first > 0


def test_svd_rejects_nonfinite():
    with pytest.raises(ValueError):
        svd_factors(np.array([[np.nan, 1.0], [0.0, 1.0]]))


def test_eckart_young_diag_rank1():
    pts = eckart_young_points(np.diag([3.0, 2.0, 1.0]), 1)
    assert len(pts) == 3
    mats = sorted(tuple(np.round(p.X, 9).ravel()) for p in pts)
    expect = sorted(tuple(np.round(np.diag(v), 9).ravel())
                    for v in ([3, 0, 0], [0, 2, 0], [0, 0, 1.0]))
    assert mats == expect
    assert pts[0].distance_sq == pytest.approx(2.0**2 + 1.0**2)


def test_eckart_young_counts_and_best():
    rng = np.random.default_rng(2)
    U = rng.standard_normal((3, 3))
    pts = eckart_young_points(U, 2)
    assert len(pts) == 3
    best = eckart_young_points(np.diag([3.0, 2.0, 1.0]), 2)[0]
    assert np.allclose(best.X, np.diag([3.0, 2.0, 0.0]), atol=1e-12)
    assert best.distance_sq == pytest.approx(1.0)


def test_eckart_young_first_order_criticality():
    rng = np.random.default_rng(3)
    for m, n, r in [(3, 4, 1), (3, 4, 2), (4, 4, 3)]:
        U = rng.standard_normal((m, n))
        pts = eckart_young_points(U, r)
        from math import comb
        assert len(pts) == comb(min(m, n), r)
        for p in pts:
            R = U - p.X
            assert np.linalg.norm(R @ p.X.T) <= 1e-9 * (1 + np.linalg.norm(U)) ** 2
            assert np.linalg.norm(p.X.T @ R) <= 1e-9 * (1 + np.linalg.norm(U)) ** 2


def test_eckart_young_nongeneric_error():
    with pytest.raises(NonGenericSpectrumError):
        eckart_young_points(np.eye(3), 1)
    with pytest.raises(ValueError):
        eckart_young_points(np.diag([3.0, 2.0, 1.0]), 4)


def test_project_onto_pattern():
    U = np.array([[1.0, 2.0], [3.0, 4.0]])
    S = ZeroPattern.from_text("2 2; 1 1")
    assert np.array_equal(project_onto_pattern(U, S),
                          np.array([[0.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(project_onto_pattern(U, ZeroPattern.empty(2, 2)), U)


def test_best_rank1_structured_paper_example():
    S = ZeroPattern.from_text("3 4; 1 1; 1 2")
    best, allpts = best_rank1_structured(PAPER_U_3X4, S)
    assert np.allclose(best.X, PAPER_X_3X4, atol=5e-6)
    # the winning cover zeroes the first two columns
    assert best.provenance[0] == "cover"
    assert best.provenance[2] == (0, 1)
    assert len(allpts) == rank1_ed_degree(S)


def test_best_rank1_structured_empty_pattern():
    rng = np.random.default_rng(4)
    U = rng.standard_normal((3, 4))
    best, allpts = best_rank1_structured(U, ZeroPattern.empty(3, 4))
    fac = svd_factors(U)
    top = fac.sigma[0] * np.outer(fac.A[:, 0], fac.B[:, 0])
    assert np.allclose(best.X, top, atol=1e-10)
    assert len(allpts) == 3


def test_best_rank1_structured_count_and_vanishing():
    rng = np.random.default_rng(5)
    for _ in range(10):
        bits = int(rng.integers(0, 1 << 9))
        pairs = [(p // 3, p % 3) for p in range(9) if bits >> p & 1]
        if len(pairs) == 9:
            continue
        S = ZeroPattern.make(3, 3, pairs)
        if rank1_ed_degree(S) == 0:
            continue
        U = rng.standard_normal((3, 3))
        best, allpts = best_rank1_structured(U, S)
        assert len(allpts) == rank1_ed_degree(S)
        for p in allpts:
            for i, j in S.entries:
                assert p.X[i, j] == 0.0
            assert np.linalg.svd(p.X, compute_uv=False)[1:].max(initial=0) <= \
                1e-9 * (1 + np.abs(p.X).max())
        assert best.distance_sq == min(p.distance_sq for p in allpts)


def _rank1_oracle(U, S, rng, restarts=60):
    """Multi-start local optimization over all charts of the constraint
    a_i b_j = 0 per forced zero: pick which factor coordinate vanishes."""
    from scipy.optimize import minimize
    m, n = U.shape
    best = np.inf
    for choice in itertools.product((0, 1), repeat=S.size):
        a_zero = {i for c, (i, j) in zip(choice, S.entries) if c == 0}
        b_zero = {j for c, (i, j) in zip(choice, S.entries) if c == 1}
        a_free = [i for i in range(m) if i not in a_zero]
        b_free = [j for j in range(n) if j not in b_zero]
        if not a_free or not b_free:
            continue

        def objective(z, a_free=a_free, b_free=b_free):
            a = np.zeros(m)
            b = np.zeros(n)
            a[a_free] = z[:len(a_free)]
            b[b_free] = z[len(a_free):]
            return np.sum((U - np.outer(a, b)) ** 2)

        for _ in range(restarts):
            z0 = rng.standard_normal(len(a_free) + len(b_free))
            res = minimize(objective, z0, method="BFGS")
            best = min(best, res.fun)
    return best


def test_best_rank1_structured_against_local_oracle():
    rng = np.random.default_rng(6)
    for _ in range(3):
        U = rng.standard_normal((3, 3))
        S = ZeroPattern.from_text("3 3; 1 1")
        best, _ = best_rank1_structured(U, S)
        oracle = _rank1_oracle(U, S, rng)
        assert best.distance_sq == pytest.approx(oracle, abs=1e-6)


def test_rectangular_rank_r():
    rng = np.random.default_rng(7)
    U = rng.standard_normal((3, 3))
    # zero out row 1: complement is {2,3} x {1,2,3}
    S = ZeroPattern.make(3, 3, [(0, j) for j in range(3)])
    pts = rectangular_rank_r(U, S, 1)
    assert len(pts) == 2
    masked = U.copy()
    masked[0, :] = 0.0
    ey = eckart_young_points(masked, 1, data=U)
    assert np.allclose(sorted(p.distance_sq for p in pts),
                       sorted(p.distance_sq for p in ey))

    # complement {2,3} x {1,2}, full-rank block: single point, the block itself
    S2 = ZeroPattern.make(3, 3, [(0, 0), (0, 1), (0, 2), (1, 2), (2, 2)])
    pts2 = rectangular_rank_r(U, S2, 2)
    assert len(pts2) == 1
    expect = np.zeros((3, 3))
    expect[1:, :2] = U[1:, :2]
    assert np.allclose(pts2[0].X, expect, atol=1e-12)

    with pytest.raises(SupportError):
        rectangular_rank_r(U, ZeroPattern.make(3, 3, [(0, 0)]), 1)


def test_rectangular_empty_pattern_equals_unstructured():
    rng = np.random.default_rng(8)
    U = rng.standard_normal((3, 4))
    pts = rectangular_rank_r(U, ZeroPattern.empty(3, 4), 2)
    ey = eckart_young_points(U, 2)
    assert len(pts) == len(ey)
    for p, q in zip(pts, ey):
        assert np.allclose(p.X, q.X, atol=1e-10)


def test_block_diagonal_paper_example():
    blocks = [((0, 1), (0, 1)), ((2,), (2,))]
    pts = block_diagonal_rank_r(PAPER_U_BLOCKS, blocks, 2)
    assert len(pts) == 3
    found = {tuple(np.round(p.X, 4).ravel()) for p in pts}
    for C in (PAPER_C1, PAPER_C2, PAPER_C3):
        assert any(np.allclose(np.array(f).reshape(3, 3), C, atol=5e-4)
                   for f in found), C
    best = min(pts, key=lambda p: p.distance_sq)
    assert np.allclose(best.X, PAPER_C2, atol=5e-4)


def test_block_diagonal_single_block_is_unstructured():
    rng = np.random.default_rng(9)
    U = rng.standard_normal((3, 3))
    pts = block_diagonal_rank_r(U, [((0, 1, 2), (0, 1, 2))], 2)
    ey = eckart_young_points(U, 2)
    assert len(pts) == len(ey)
    assert np.allclose(sorted(p.distance_sq for p in pts),
                       sorted(q.distance_sq for q in ey), atol=1e-12)


def test_block_diagonal_two_singletons():
    U = np.diag([5.0, 7.0])
    pts = block_diagonal_rank_r(U, [((0,), (0,)), ((1,), (1,))], 1)
    assert len(pts) == 2
    mats = {tuple(p.X.ravel()) for p in pts}
    assert (5.0, 0.0, 0.0, 0.0) in mats and (0.0, 0.0, 0.0, 7.0) in mats


def test_block_diagonal_rejects_overlap():
    U = np.eye(3)
    with pytest.raises(SupportError):
        block_diagonal_rank_r(U, [((0, 1), (0, 1)), ((1,), (2,))], 1)


def test_complement_blocks_detection():
    S = ZeroPattern.make(3, 3, [(0, 2), (1, 2), (2, 0), (2, 1)])
    blocks = complement_blocks(S)
    assert blocks == [((0, 1), (0, 1)), ((2,), (2,))]
    assert complement_blocks(ZeroPattern.empty(3, 4)) == [((0, 1, 2), (0, 1, 2, 3))]
    assert complement_blocks(ZeroPattern.make(2, 2, [(0, 0)])) is None
