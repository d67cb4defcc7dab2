"""Exact closed-form solvers built on the singular value decomposition.

Critical points of the squared Frobenius distance from a data matrix to the
variety of rank-<= r matrices are sums of r SVD components; this module
enumerates them and extends the construction to structured supports where
exact answers exist: rank-one approximation through minimal covers, and
rank-r approximation when the free entries form a rectangular or
block-diagonal support.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .patterns import ZeroPattern, complement_blocks, minimal_covers

# scale-invariant genericity thresholds
TAU_SEP = 1e-9     # singular value separation, relative to sigma_1
TAU_RANK = 1e-9    # numerical rank cutoff, relative to sigma_1
BEST_TIE = 1e-12   # tie detection between candidate distances, relative


class NonGenericSpectrumError(ValueError):
    """Repeated nonzero singular values: critical points are not isolated."""


class SupportError(ValueError):
    """Zero pattern does not have the support shape an operation requires."""


@dataclass(frozen=True)
class SvdFactors:
    """Full SVD ``U = A @ diag_embed(sigma) @ B.T`` with a fixed sign
    convention: the first nonzero entry of every left singular vector that
    pairs with a singular value is positive."""

    A: np.ndarray
    sigma: np.ndarray
    B: np.ndarray

    def reconstruct(self):
        m, n = self.A.shape[0], self.B.shape[0]
        S = np.zeros((m, n))
        np.fill_diagonal(S, self.sigma)
        return self.A @ S @ self.B.T


@dataclass
class RealCriticalPoint:
    """One real critical point: the matrix, its squared distance to the
    data matrix, and which construction produced it."""

    X: np.ndarray
    distance_sq: float
    provenance: tuple
    tie: bool = field(default=False)

    def sort_key(self):
        return (self.distance_sq, self.provenance,
                tuple(np.round(self.X, 12).ravel()))


def _fix_signs(A, sigma, B):
    m = A.shape[0]
    n = B.shape[0]
    k = len(sigma)
    A = A.copy()
    B = B.copy()
    for i in range(m):
        col = A[:, i]
        nz = np.nonzero(np.abs(col) > 1e-12 * max(1.0, np.abs(col).max()))[0]
        if nz.size and col[nz[0]] < 0:
            A[:, i] = -col
            if i < k:
                B[:, i] = -B[:, i]
    for j in range(k, n):
        col = B[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12 * max(1.0, np.abs(col).max()))[0]
        if nz.size and col[nz[0]] < 0:
            B[:, j] = -col
    return A, B


def svd_factors(U) -> SvdFactors:
    """Deterministic full SVD of a real matrix.

    Raises ValueError on non-finite input.
    """
    U = np.asarray(U, dtype=float)
    if not np.all(np.isfinite(U)):
        raise ValueError("matrix has non-finite entries")
    A, sigma, Bt = np.linalg.svd(U, full_matrices=True)
    B = Bt.T
    A, B = _fix_signs(A, sigma, B)
    return SvdFactors(A=A, sigma=sigma, B=B)


def numerical_rank(sigma, tol=TAU_RANK):
    sigma = np.asarray(sigma, dtype=float)
    if sigma.size == 0 or sigma[0] <= 0:
        return 0
    return int(np.sum(sigma > tol * sigma[0]))


def _check_generic_spectrum(sigma, k, context=""):
    if k == 0:
        return
    s1 = sigma[0]
    for i in range(k - 1):
        if sigma[i] - sigma[i + 1] <= TAU_SEP * s1:
            raise NonGenericSpectrumError(
                f"repeated nonzero singular values near index {i}{context}")


def eckart_young_points(U, r, data=None, provenance_prefix=("svd_subset",)):
    """All critical points of rank-<= r approximation of an unstructured
    matrix: one point per r-subset of the nonzero singular values.

    Parameters
    ----------
    U : array
        Matrix whose SVD supplies the components.
    r : int
        Target rank, 1 <= r <= rank(U).
    data : array, optional
        Matrix used for the reported squared distances (defaults to ``U``;
        structured constructions pass the original unmasked data here).

    Returns the list sorted by squared distance.  Raises
    NonGenericSpectrumError when the nonzero singular values are not
    pairwise separated, and ValueError when r is out of range.
    """
    U = np.asarray(U, dtype=float)
    if data is None:
        data = U
    fac = svd_factors(U)
    k = numerical_rank(fac.sigma)
    if not 1 <= r <= k:
        raise ValueError(f"rank r={r} out of range 1..rank={k}")
    _check_generic_spectrum(fac.sigma, k)
    pts = []
    for subset in itertools.combinations(range(k), r):
        X = (fac.A[:, subset] * fac.sigma[list(subset)]) @ fac.B[:, subset].T
        d = float(np.sum((data - X) ** 2))
        pts.append(RealCriticalPoint(X=X, distance_sq=d,
                                     provenance=provenance_prefix + (subset,)))
    pts.sort(key=RealCriticalPoint.sort_key)
    return pts


def project_onto_pattern(U, pattern: ZeroPattern):
    """Copy of U with the pattern entries set to zero."""
    U = np.asarray(U, dtype=float)
    out = U.copy()
    for i, j in pattern.entries:
        out[i, j] = 0.0
    return out


def _mask_cover(U, cover):
    out = np.asarray(U, dtype=float).copy()
    rows = sorted(cover.rows)
    cols = sorted(cover.cols)
    if rows:
        out[rows, :] = 0.0
    if cols:
        out[:, cols] = 0.0
    return out


def _dedup_points(points, scale):
    kept = []
    for p in points:
        dup = False
        for q in kept:
            if np.max(np.abs(p.X - q.X)) <= 1e-9 * (1.0 + scale):
                dup = True
                break
        if not dup:
            kept.append(p)
    return kept


def _select_best(points):
    points = sorted(points, key=RealCriticalPoint.sort_key)
    best = points[0]
    tol = BEST_TIE * (1.0 + abs(best.distance_sq))
    ties = [p for p in points[1:] if abs(p.distance_sq - best.distance_sq) <= tol]
    if ties:
        best.tie = True
    return best


def best_rank1_structured(U, pattern: ZeroPattern):
    """Best rank-one approximation of U vanishing on the pattern.

    For each minimal cover, zeroes the covered rows and columns of U and
    takes all rank-one critical points of what remains; the union over
    covers, after deduplication, is the full critical set.  Returns
    ``(best, all_points)``.

    A cover whose masked matrix has a degenerate spectrum raises
    NonGenericSpectrumError tagged with the offending cover.
    """
    U = np.asarray(U, dtype=float)
    if not np.all(np.isfinite(U)):
        raise ValueError("matrix has non-finite entries")
    pts = []
    for cov in sorted(minimal_covers(pattern),
                      key=lambda c: (sorted(c.rows), sorted(c.cols))):
        masked = _mask_cover(U, cov)
        fac = svd_factors(masked)
        k = numerical_rank(fac.sigma)
        if k == 0:
            continue
        tag = ("cover", tuple(sorted(cov.rows)), tuple(sorted(cov.cols)))
        try:
            pts.extend(eckart_young_points(masked, 1, data=U,
                                           provenance_prefix=tag))
        except NonGenericSpectrumError as exc:
            raise NonGenericSpectrumError(f"{exc} [cover {tag[1:]}]") from exc
    pts = _dedup_points(pts, float(np.abs(U).max(initial=0.0)))
    if not pts:
        raise ValueError("pattern admits no rank-one critical points")
    return _select_best(pts), sorted(pts, key=RealCriticalPoint.sort_key)


def rectangular_rank_r(U, pattern: ZeroPattern, r):
    """Rank-r critical points when the complement of the pattern is a full
    block T' x T'': the unstructured critical points of the block, embedded
    with zeros elsewhere."""
    U = np.asarray(U, dtype=float)
    blocks = complement_blocks(pattern)
    if blocks is None or len(blocks) > 1:
        raise SupportError("pattern complement is not a single rectangular block")
    if not blocks:
        raise SupportError("pattern forces the whole matrix to zero")
    rows, cols = blocks[0]
    if r > min(len(rows), len(cols)):
        raise ValueError(f"rank {r} exceeds block shape {len(rows)}x{len(cols)}")
    sub = U[np.ix_(rows, cols)]
    pts = []
    for p in eckart_young_points(sub, r):
        X = np.zeros_like(U)
        X[np.ix_(rows, cols)] = p.X
        d = float(np.sum((U - X) ** 2))
        pts.append(RealCriticalPoint(
            X=X, distance_sq=d,
            provenance=("rectangular", rows, cols) + p.provenance[1:]))
    pts.sort(key=RealCriticalPoint.sort_key)
    return pts


def _compositions(total, caps):
    """All tuples (r_1, ..., r_s) with sum = total and 0 <= r_i <= caps[i]."""
    if len(caps) == 1:
        return [(total,)] if 0 <= total <= caps[0] else []
    out = []
    for head in range(min(total, caps[0]) + 1):
        for rest in _compositions(total - head, caps[1:]):
            out.append((head,) + rest)
    return out


def block_diagonal_rank_r(U, blocks, r):
    """Rank-r critical points for a block-diagonal support.

    ``blocks`` is a list of (rows, cols) index tuples, pairwise disjoint on
    both sides.  Critical points are cartesian products of per-block
    unstructured critical points, one product per composition of r among
    the blocks that respects each block's maximal rank.
    """
    U = np.asarray(U, dtype=float)
    blocks = [(tuple(rows), tuple(cols)) for rows, cols in blocks]
    seen_r, seen_c = set(), set()
    for rows, cols in blocks:
        if seen_r & set(rows) or seen_c & set(cols):
            raise SupportError("blocks overlap")
        seen_r |= set(rows)
        seen_c |= set(cols)
    per_block = []
    for rows, cols in blocks:
        sub = U[np.ix_(rows, cols)]
        fac = svd_factors(sub)
        k = numerical_rank(fac.sigma)
        choices = {0: [None]}
        for ri in range(1, k + 1):
            choices[ri] = eckart_young_points(sub, ri)
        per_block.append((rows, cols, k, choices))
    caps = [k for _, _, k, _ in per_block]
    pts = []
    for comp in _compositions(r, caps):
        pools = [per_block[i][3][comp[i]] for i in range(len(blocks))]
        for pick in itertools.product(*pools):
            X = np.zeros_like(U)
            for (rows, cols, _, _), chosen in zip(per_block, pick):
                if chosen is not None:
                    X[np.ix_(rows, cols)] = chosen.X
            d = float(np.sum((U - X) ** 2))
            prov = ("blocks", comp,
                    tuple(() if c is None else c.provenance[-1] for c in pick))
            pts.append(RealCriticalPoint(X=X, distance_sq=d, provenance=prov))
    pts.sort(key=RealCriticalPoint.sort_key)
    return pts
