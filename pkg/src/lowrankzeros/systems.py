"""Lagrange critical systems for rank-constrained approximation.

The critical points of the squared Frobenius distance from a data matrix U
to the set of rank-<= r matrices satisfying linear constraints solve

    M_IJ(X) = 0                   for every (r+1)-minor,
    L_k(X) = 0                    for every constraint,
    U - X = sum lam_IJ grad M_IJ + sum mu_k grad L_k,

with multiplier vectors lam (one per minor) and mu (one per constraint).
This module builds that polynomial system with a fixed equation and
variable order, evaluates residuals and analytic Jacobians on batches of
points, and fabricates exact seed solutions for monodromy.

All evaluation code is vectorized over a leading batch axis; matrices are
flattened row-major.  U enters as a parameter block, not a variable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .patterns import ZeroPattern


class SystemError(ValueError):
    """Out-of-contract system construction."""


class SeedError(RuntimeError):
    """Seed fabrication failed repeatedly (non-generic geometry)."""


# ---------------------------------------------------------------------------
# small batched determinant / cofactor kernels
# ---------------------------------------------------------------------------

def det_batch(a):
    """Determinants over the last two axes; closed forms up to 3x3."""
    k = a.shape[-1]
    if k == 0:
        return np.ones(a.shape[:-2], dtype=a.dtype)
    if k == 1:
        return a[..., 0, 0]
    if k == 2:
        return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    if k == 3:
        return (a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
                - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
                + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0]))
    return np.linalg.det(a)


_COF_CACHE = {}


def _cof_index_tables(k):
    # for each (a, b): positions of the complementary (k-1)x(k-1) block
    if k in _COF_CACHE:
        return _COF_CACHE[k]
    rows = np.zeros((k, k, k - 1, 1), dtype=np.intp)
    cols = np.zeros((k, k, 1, k - 1), dtype=np.intp)
    signs = np.zeros((k, k))
    for a in range(k):
        for b in range(k):
            rows[a, b, :, 0] = [i for i in range(k) if i != a]
            cols[a, b, 0, :] = [j for j in range(k) if j != b]
            signs[a, b] = (-1.0) ** (a + b)
    _COF_CACHE[k] = (rows, cols, signs)
    return _COF_CACHE[k]


def cofactor_batch(a):
    """Cofactor matrices over the last two axes (stable at singular input)."""
    k = a.shape[-1]
    if k == 1:
        return np.ones_like(a)
    if k == 2:
        out = np.empty_like(a)
        out[..., 0, 0] = a[..., 1, 1]
        out[..., 0, 1] = -a[..., 1, 0]
        out[..., 1, 0] = -a[..., 0, 1]
        out[..., 1, 1] = a[..., 0, 0]
        return out
    rows, cols, signs = _cof_index_tables(k)
    sub = a[..., rows, cols]          # (..., k, k, k-1, k-1)
    return det_batch(sub) * signs


# ---------------------------------------------------------------------------
# system construction
# ---------------------------------------------------------------------------

@dataclass
class SystemPoint:
    """One point in the variable space of a critical system."""

    x: np.ndarray    # (m*n,) complex, row-major
    lam: np.ndarray  # one entry per minor
    mu: np.ndarray   # one entry per constraint

    def to_vector(self):
        return np.concatenate([self.x, self.lam, self.mu])

    @classmethod
    def from_vector(cls, system, z):
        z = np.asarray(z)
        nx, nl = system.n_x, system.n_lam
        return cls(x=z[:nx], lam=z[nx:nx + nl], mu=z[nx + nl:])

    def matrix(self, system):
        return self.x.reshape(system.m, system.n)


class CriticalSystem:
    """The Lagrange system for rank-<= r critical points under linear
    constraints on an m x n matrix.

    Equation order: all (r+1)-minors in lexicographic (I, J) order, then
    the constraints, then the m*n stationarity equations row-major.
    Variable order: x block, lambda block, mu block.
    """

    def __init__(self, m, n, r, constraint_mats, pattern=None):
        if not 1 <= r < min(m, n):
            raise SystemError(f"rank r={r} out of range 1..min(m,n)-1")
        self.m, self.n, self.r = int(m), int(n), int(r)
        self.pattern = pattern
        k = self.r + 1
        self.minor_order = k
        cm = np.asarray(constraint_mats, dtype=complex)
        if cm.size == 0:
            cm = cm.reshape(0, m, n)
        if cm.shape[1:] != (m, n):
            raise SystemError(f"constraint matrices must be {m}x{n}")
        s = cm.shape[0]
        if s:
            rank = np.linalg.matrix_rank(cm.reshape(s, m * n))
            if rank < s:
                raise SystemError("constraints are linearly dependent")
        self.constraints = cm
        self.n_x = m * n
        self.minor_index = [(I, J)
                            for I in itertools.combinations(range(m), k)
                            for J in itertools.combinations(range(n), k)]
        self.n_lam = len(self.minor_index)
        self.n_mu = s
        self.n_var = self.n_x + self.n_lam + self.n_mu
        self.n_eq = self.n_lam + self.n_mu + self.n_x
        self.minor_codim = (m - r) * (n - r)
        self.equation_degrees = np.concatenate([
            np.full(self.n_lam, k), np.ones(self.n_mu), np.full(self.n_x, k)])
        self._build_tables()

    def _build_tables(self):
        m, n, k = self.m, self.n, self.minor_order
        Q = self.n_lam
        self._rows = np.array([I for I, _ in self.minor_index], dtype=np.intp)
        self._cols = np.array([J for _, J in self.minor_index], dtype=np.intp)
        # flat x positions of every submatrix entry, per minor
        pos = (self._rows[:, :, None] * n + self._cols[:, None, :])  # (Q, k, k)
        self._grad_q = np.repeat(np.arange(Q, dtype=np.intp), k * k)
        self._grad_pos = pos.reshape(Q * k * k)
        # second-derivative table: unordered pairs (a,b),(c,d), a<c, b!=d
        pair_q, pair_sign = [], []
        pair_rk, pair_ck = [], []
        scatter_cols = []
        mn = m * n
        for q in range(Q):
            I, J = self.minor_index[q]
            for a in range(k):
                for c in range(a + 1, k):
                    for b in range(k):
                        for d in range(k):
                            if b == d:
                                continue
                            par = (-1.0) ** (a + b + c + d)
                            sgn = par * (1.0 if b < d else -1.0)
                            p1 = I[a] * n + J[b]
                            p2 = I[c] * n + J[d]
                            pair_q.append(q)
                            pair_sign.append(sgn)
                            pair_rk.append([i for i in range(k) if i not in (a, c)])
                            pair_ck.append([j for j in range(k) if j not in (b, d)])
                            scatter_cols.append((p1 * mn + p2, p2 * mn + p1))
        npairs = len(pair_q)
        self._pair_q = np.asarray(pair_q, dtype=np.intp)
        self._pair_sign = np.asarray(pair_sign)
        self._pair_rk = np.asarray(pair_rk, dtype=np.intp).reshape(npairs, k - 2, 1)
        self._pair_ck = np.asarray(pair_ck, dtype=np.intp).reshape(npairs, 1, k - 2)
        scatter = np.zeros((npairs, mn * mn))
        for p, (c1, c2) in enumerate(scatter_cols):
            scatter[p, c1] += 1.0
            scatter[p, c2] += 1.0
        self._hess_scatter = scatter

    # -- batched primitives --

    def _submatrices(self, X):
        # X: (P, m, n) -> (P, Q, k, k)
        return X[:, self._rows[:, :, None], self._cols[:, None, :]]

    def minor_values(self, X):
        return det_batch(self._submatrices(X))

    def minor_gradients(self, X):
        """(P, Q, m*n) gradients of every minor at every point."""
        P = X.shape[0]
        cof = cofactor_batch(self._submatrices(X))  # (P, Q, k, k)
        k = self.minor_order
        grad = np.zeros((P, self.n_lam, self.n_x), dtype=X.dtype)
        grad[:, self._grad_q, self._grad_pos] = cof.reshape(P, -1)
        return grad

    def evaluate_batch(self, Z, U):
        """Residuals for a batch: Z (P, n_var), U (P, n_x) -> (P, n_eq)."""
        Z = np.atleast_2d(Z)
        U = np.atleast_2d(U)
        P = Z.shape[0]
        x = Z[:, :self.n_x]
        lam = Z[:, self.n_x:self.n_x + self.n_lam]
        mu = Z[:, self.n_x + self.n_lam:]
        X = x.reshape(P, self.m, self.n)
        minors = self.minor_values(X)
        grads = self.minor_gradients(X)
        out = np.empty((P, self.n_eq), dtype=np.result_type(Z, U))
        out[:, :self.n_lam] = minors
        if self.n_mu:
            cflat = self.constraints.reshape(self.n_mu, self.n_x)
            out[:, self.n_lam:self.n_lam + self.n_mu] = x @ cflat.T
            stat_cons = mu @ cflat
        else:
            stat_cons = 0.0
        stat = U - x - np.einsum("pq,pqe->pe", lam, grads) - stat_cons
        out[:, self.n_lam + self.n_mu:] = stat
        return out

    def _hessian_term(self, X, lam):
        """(P, mn, mn) second-derivative block sum_q lam_q Hess(M_q)."""
        P = X.shape[0]
        if self._pair_q.size == 0:
            return np.zeros((P, self.n_x, self.n_x), dtype=X.dtype)
        subs = self._submatrices(X)
        inner = subs[:, self._pair_q[:, None, None], self._pair_rk, self._pair_ck]
        dets2 = det_batch(inner)  # (P, npairs)
        contrib = lam[:, self._pair_q] * self._pair_sign * dets2
        H = contrib @ self._hess_scatter.astype(X.dtype)
        return H.reshape(P, self.n_x, self.n_x)

    def jacobian_batch(self, Z, U=None):
        """Analytic Jacobian with respect to all variables: (P, n_eq, n_var).

        U does not appear (it is a parameter), the argument is accepted for
        signature symmetry with evaluate_batch.
        """
        Z = np.atleast_2d(Z)
        P = Z.shape[0]
        x = Z[:, :self.n_x]
        lam = Z[:, self.n_x:self.n_x + self.n_lam]
        X = x.reshape(P, self.m, self.n)
        grads = self.minor_gradients(X)
        dt = Z.dtype
        J = np.zeros((P, self.n_eq, self.n_var), dtype=dt)
        J[:, :self.n_lam, :self.n_x] = grads
        row0 = self.n_lam
        if self.n_mu:
            cflat = self.constraints.reshape(self.n_mu, self.n_x).astype(dt)
            J[:, row0:row0 + self.n_mu, :self.n_x] = cflat
        row1 = self.n_lam + self.n_mu
        H = self._hessian_term(X, lam)
        eye = np.eye(self.n_x, dtype=dt)
        J[:, row1:, :self.n_x] = -eye - H
        J[:, row1:, self.n_x:self.n_x + self.n_lam] = -grads.transpose(0, 2, 1)
        if self.n_mu:
            J[:, row1:, self.n_x + self.n_lam:] = -cflat.T
        return J

    # -- single-point conveniences --

    def evaluate(self, point: SystemPoint, U):
        U = np.asarray(U, dtype=complex).reshape(1, self.n_x)
        return self.evaluate_batch(point.to_vector()[None, :], U)[0]

    def jacobian(self, point: SystemPoint, U=None):
        return self.jacobian_batch(point.to_vector()[None, :])[0]

    def parameter_shift_rows(self):
        """Index range of the equations that carry the parameter U."""
        start = self.n_lam + self.n_mu
        return start, start + self.n_x

    def to_manifest_dict(self):
        return {
            "m": self.m, "n": self.n, "r": self.r,
            "equations": {"minors": self.n_lam, "constraints": self.n_mu,
                          "stationarity": self.n_x},
            "variables": {"x": self.n_x, "lambda": self.n_lam, "mu": self.n_mu},
            "minor_index": [[list(i + 1 for i in I), list(j + 1 for j in J)]
                            for I, J in self.minor_index],
            "constraints": [[[c.real, c.imag] for c in row]
                            for row in self.constraints.reshape(self.n_mu, -1)],
            "pattern": self.pattern.to_json_dict() if self.pattern else None,
        }


def build_system(m, n, r, constraints=None) -> CriticalSystem:
    """Construct the critical system.

    ``constraints`` may be a ZeroPattern (coordinate forms x_ij), a list of
    coefficient matrices for general linear forms, or None/empty.
    """
    pattern = None
    if constraints is None:
        mats = np.zeros((0, m, n))
    elif isinstance(constraints, ZeroPattern):
        pattern = constraints
        if (constraints.m, constraints.n) != (m, n):
            raise SystemError("pattern shape does not match system shape")
        mats = np.zeros((len(constraints.entries), m, n))
        for k, (i, j) in enumerate(constraints.entries):
            mats[k, i, j] = 1.0
    else:
        mats = np.asarray(constraints, dtype=complex)
        if mats.ndim == 2:
            mats = mats[None, :, :]
    return CriticalSystem(m, n, r, mats, pattern=pattern)


def corank_one_general_constraint(m, V) -> CriticalSystem:
    """System for corank-one square matrices under one general linear form
    with coefficient matrix V; V = 0 means the unconstrained system."""
    V = np.asarray(V, dtype=complex)
    if V.shape != (m, m):
        raise SystemError(f"V must be {m}x{m}")
    if np.allclose(V, 0):
        return build_system(m, m, m - 1, None)
    return build_system(m, m, m - 1, [V])


# ---------------------------------------------------------------------------
# multiplier slices and seed pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplierSlice:
    """Generic affine conditions on the lambda block.

    When the system lists more minors than the rank variety's codimension,
    the multipliers at a critical point form a positive-dimensional affine
    family; a generic slice pins one multiplier vector per critical point so
    path tracking sees isolated solutions.  The x part of the solutions does
    not depend on the slice.
    """

    C: np.ndarray  # (d, n_lam)
    b: np.ndarray  # (d,)

    @property
    def dim(self):
        return self.C.shape[0]


def multiplier_slice(system: CriticalSystem, rng, lam0=None):
    """Random unit-row slice of the lambda fiber; None when not needed.

    When ``lam0`` is given the slice passes through it exactly.
    """
    d = system.n_lam - system.minor_codim
    if d <= 0:
        return None
    C = rng.standard_normal((d, system.n_lam)) + 1j * rng.standard_normal((d, system.n_lam))
    C /= np.linalg.norm(C, axis=1, keepdims=True)
    if lam0 is None:
        b = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    else:
        b = C @ lam0
    return MultiplierSlice(C=C, b=b)


def _complex_normal(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _rank_exactly(X, r):
    sv = np.linalg.svd(X, compute_uv=False)
    if sv[0] == 0:
        return r == 0
    ok_top = sv[min(r, len(sv)) - 1] > 1e-6 * sv[0] if r else True
    ok_rest = len(sv) <= r or sv[r] < 1e-9 * sv[0]
    return ok_top and ok_rest


def sample_on_variety(system: CriticalSystem, rng, supports=None, attempts=25,
                      flip_first=False):
    """Random complex rank-r matrix satisfying the system's constraints.

    ``supports`` optionally lists (rows, cols, rank_i) triples: the factors
    are then supported on those blocks (rank_i summing to r), which places
    the sample on a chosen component of a reducible variety and must make
    the constraints hold automatically.  Without supports, a generic rank
    factorization is corrected onto the constraint space: the left factor is
    drawn freely and the right factor is moved inside the constraint
    nullspace (a complex-linear solve), with the roles flipped on ties.
    """
    m, n, r = system.m, system.n, system.r
    cons = system.constraints
    s = system.n_mu
    for attempt in range(attempts):
        if supports is not None:
            A = np.zeros((m, r), dtype=complex)
            B = np.zeros((r, n), dtype=complex)
            col = 0
            for rows, cols, ri in supports:
                if ri == 0:
                    continue
                A[np.ix_(list(rows), range(col, col + ri))] = _complex_normal(rng, (len(rows), ri))
                B[np.ix_(range(col, col + ri), list(cols))] = _complex_normal(rng, (ri, len(cols)))
                col += ri
            if col != r:
                raise SystemError("support ranks must sum to r")
            X = A @ B
            if s and np.max(np.abs(X.reshape(-1) @ cons.reshape(s, -1).T)) > 1e-10:
                raise SystemError("supports do not satisfy the constraints")
        else:
            flip = (attempt % 2 == 1) != flip_first
            A = _complex_normal(rng, (m, r))
            B = _complex_normal(rng, (r, n))
            if s:
                if not flip:
                    W = np.einsum("ar,kan->krn", A, cons).reshape(s, r * n)
                    vec0 = B.reshape(-1)
                else:
                    W = np.einsum("rb,kmb->kmr", B, cons).reshape(s, m * r)
                    vec0 = A.reshape(-1)
                G = W @ W.T
                if abs(np.linalg.det(G)) < 1e-12:
                    continue
                vec = vec0 - W.T @ np.linalg.solve(G, W @ vec0)
                if not flip:
                    B = vec.reshape(r, n)
                else:
                    A = vec.reshape(m, r)
            X = A @ B
        if _rank_exactly(X, r):
            return X
    raise SeedError(f"could not sample a rank-{r} point on the constraint space")


def seed_pair(system: CriticalSystem, rng, supports=None, flip_first=False):
    """Fabricate an exact solution: sample X0 on the variety, draw random
    multipliers, and let the stationarity equation define the parameter U0.

    Returns ``(U0, point)`` with U0 flat complex and ``point`` a
    :class:`SystemPoint`; the residual vanishes to roundoff by construction.
    """
    X0 = sample_on_variety(system, rng, supports=supports, flip_first=flip_first)
    lam0 = _complex_normal(rng, system.n_lam, scale=0.5)
    mu0 = _complex_normal(rng, system.n_mu, scale=0.5)
    x0 = X0.reshape(-1)
    grads = system.minor_gradients(X0[None, :, :])[0]
    U0 = x0 + grads.T @ lam0
    if system.n_mu:
        U0 = U0 + system.constraints.reshape(system.n_mu, -1).T @ mu0
    return U0, SystemPoint(x=x0, lam=lam0, mu=mu0)
