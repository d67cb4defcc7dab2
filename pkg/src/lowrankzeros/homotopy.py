"""Numerical solution of critical systems by homotopy continuation.

The solver tracks solutions of the Lagrange system through complex
parameter space with an adaptive Euler predictor / Newton corrector,
harvests the full solution set of one generic parameter point by monodromy
loops, and carries that set to any concrete data matrix by parameter
homotopy.  Path tracking is vectorized: a whole batch of paths advances
together, each with its own step size and its own parameter segment.

Systems whose minor list is longer than the rank variety's codimension
have non-unique multipliers; tracking then runs on the system extended by
a generic affine multiplier slice (see systems.MultiplierSlice) and the
corrector solves least-squares Newton steps through a batched QR.

Varieties cut out by zero patterns can be reducible.  Monodromy only ever
fills up the solution set of the component its seed lies on, so seeding
enumerates one start point per known component type: generic samples for
the main component, one sample per minimal cover for rank one, per-block
rank compositions for block-diagonal supports, and projections onto
cover subspaces that happen to be components.  Every candidate seed is
verified (exact residual, regular Jacobian) before use; candidates on
singular strata fail those checks and are dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .patterns import ZeroPattern, complement_blocks, is_diagonal_type, minimal_covers
from .systems import (
    CriticalSystem,
    MultiplierSlice,
    SeedError,
    SystemPoint,
    build_system,
    multiplier_slice,
    sample_on_variety,
    seed_pair,
)

STATUS_SUCCESS = "success"
STATUS_UNDERFLOW = "step_underflow"
STATUS_MAX_STEPS = "max_steps"
STATUS_DIVERGED = "path_to_infinity"
STATUS_CORRECTOR = "corrector_divergence"


@dataclass
class TrackerConfig:
    """Knobs of the predictor-corrector tracker and the monodromy driver."""

    initial_step: float = 0.1
    min_step: float = 1e-7
    max_step: float = 0.5
    newton_tol: float = 1e-10
    max_corrector_iters: int = 5
    step_expand: float = 2.0
    step_contract: float = 0.4
    expand_after: int = 2
    max_steps: int = 1500
    endgame_radius: float = 0.02
    gamma_scale: float = 0.4
    divergence_bound: float = 1e9
    polish_tol: float = 5e-14
    residual_tol: float = 1e-9
    dedup_tol: float = 1e-6
    tau_real: float = 1e-8
    stable_loops: int = 5
    max_loops: int = 60
    leg_retries: int = 3
    target_retries: int = 1

    def validate(self):
        if not (0 < self.min_step <= self.initial_step <= self.max_step):
            raise ValueError("need 0 < min_step <= initial_step <= max_step")
        if self.newton_tol <= 0 or self.residual_tol <= 0:
            raise ValueError("tolerances must be positive")
        return self


def _complex_normal(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


# ---------------------------------------------------------------------------
# tracked system = critical system + optional multiplier slice
# ---------------------------------------------------------------------------

class TrackedSystem:
    """Critical system extended by the multiplier slice rows used only
    during tracking; the slice does not change the x part of solutions.

    With ``reducer`` set, the minor equations are replaced by as many
    generic linear combinations as the rank variety's codimension, which
    together with the slice makes the tracked system square.  Points of
    the original variety remain solutions and stay on their components
    along tracked paths; endpoints are always re-verified against the full
    minor list, so spurious roots of the combinations are discarded.
    """

    def __init__(self, system: CriticalSystem, slice_: MultiplierSlice | None,
                 reducer=None):
        self.system = system
        self.slice = slice_
        self.reducer = reducer
        n_minor_rows = reducer.shape[0] if reducer is not None else system.n_lam
        self.n_var = system.n_var
        self.n_minor_rows = n_minor_rows
        self.stat_rows = slice(n_minor_rows + system.n_mu,
                               n_minor_rows + system.n_mu + system.n_x)
        self.n_eq = (n_minor_rows + system.n_mu + system.n_x
                     + (slice_.dim if slice_ else 0))
        self.square = self.n_eq == self.n_var

    def residual(self, Z, U):
        core = self.system.evaluate_batch(Z, U)
        Q = self.system.n_lam
        if self.reducer is not None:
            core = np.concatenate([core[:, :Q] @ self.reducer.T, core[:, Q:]], axis=1)
        if self.slice is None:
            return core
        lam = Z[:, self.system.n_x:self.system.n_x + Q]
        srows = lam @ self.slice.C.T - self.slice.b
        return np.concatenate([core, srows], axis=1)

    def jacobian(self, Z):
        sys_ = self.system
        core = sys_.jacobian_batch(Z)
        Q = sys_.n_lam
        if self.reducer is not None:
            top = np.einsum("cq,pqv->pcv", self.reducer, core[:, :Q, :])
            core = np.concatenate([top, core[:, Q:, :]], axis=1)
        if self.slice is None:
            return core
        P = core.shape[0]
        extra = np.zeros((P, self.slice.dim, sys_.n_var), dtype=core.dtype)
        extra[:, :, sys_.n_x:sys_.n_x + Q] = self.slice.C
        return np.concatenate([core, extra], axis=1)

    def core_residual_norm(self, Z, U):
        """Scale-relative max-norm of the core (unsliced, unreduced) residual."""
        F = self.system.evaluate_batch(Z, U)
        return _relative_residual(self.system, Z, U, F)


def minor_reducer(system: CriticalSystem, rng):
    """Generic row compression of the minor equations down to the rank
    variety's codimension; None when the minor list is already that short."""
    Q = system.n_lam
    c = system.minor_codim
    if Q <= c:
        return None
    raw = _complex_normal(rng, (Q, c))
    qmat, _ = np.linalg.qr(raw)
    return qmat.T.copy()


def _relative_residual(system, Z, U, F):
    Z = np.atleast_2d(Z)
    U = np.atleast_2d(U)
    x = Z[:, :system.n_x]
    lam = Z[:, system.n_x:system.n_x + system.n_lam]
    mu = Z[:, system.n_x + system.n_lam:]
    sx = 1.0 + np.max(np.abs(x), axis=1)
    su = np.max(np.abs(U), axis=1, initial=0.0)
    slam = np.max(np.abs(lam), axis=1, initial=0.0)
    smu = np.max(np.abs(mu), axis=1, initial=0.0)
    k = system.minor_order
    scale = np.maximum(sx, su) ** k + slam * sx ** system.r + smu + 1.0
    return np.max(np.abs(F), axis=1) / scale


def _solve_batch(J, rhs):
    """Newton steps for square or overdetermined batched systems."""
    P, E, V = J.shape
    if E == V:
        try:
            return np.linalg.solve(J, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            pass
    else:
        try:
            Q, R = np.linalg.qr(J)
            c = np.einsum("pev,pe->pv", Q.conj(), rhs)
            return np.linalg.solve(R, c[..., None])[..., 0]
        except np.linalg.LinAlgError:
            pass
    # rare singular members: per-item least squares
    out = np.empty((P, V), dtype=J.dtype)
    for p in range(P):
        try:
            out[p] = np.linalg.lstsq(J[p], rhs[p], rcond=None)[0]
        except np.linalg.LinAlgError:
            out[p] = np.nan
    return out


def _chunk_sizes(n_paths, n_eq, n_var, budget=6_000_000):
    per = max(1, int(budget / max(1, n_eq * n_var)))
    return [slice(i, min(i + per, n_paths)) for i in range(0, n_paths, per)]


# ---------------------------------------------------------------------------
# batched path tracking
# ---------------------------------------------------------------------------

def _track_chunk(tsys, z, u_from, u_to, cfg, gamma):
    """Advance one chunk of paths from t=0 to t=1; returns (z, status, steps)."""
    P = z.shape[0]
    du = u_to - u_from
    t = np.zeros(P)
    h = np.full(P, cfg.initial_step)
    streak = np.zeros(P, dtype=int)
    steps = np.zeros(P, dtype=int)
    endgame_used = np.zeros(P, dtype=bool)
    status = np.array([""] * P, dtype=object)
    active = np.ones(P, dtype=bool)

    def u_of(idx, tt):
        s = tt + gamma[idx] * tt * (1.0 - tt)
        return u_from[idx] + s[:, None] * du[idx]

    def du_dt(idx, tt):
        ds = 1.0 + gamma[idx] * (1.0 - 2.0 * tt)
        return ds[:, None] * du[idx]

    while np.any(active):
        idx = np.flatnonzero(active)
        h_eff = np.minimum(h[idx], 1.0 - t[idx])
        near_end = (1.0 - t[idx] <= cfg.endgame_radius) & ~endgame_used[idx]
        h_eff[near_end] = 1.0 - t[idx][near_end]
        endgame_used[idx[near_end]] = True

        zc = z[idx]
        tc = t[idx]
        # midpoint predictor along the Davidenko flow
        nstat = tsys.stat_rows
        J = tsys.jacobian(zc)
        Ft = np.zeros((len(idx), tsys.n_eq), dtype=complex)
        Ft[:, nstat] = du_dt(idx, tc)
        k1 = _solve_batch(J, -Ft)
        t_mid = tc + 0.5 * h_eff
        z_mid = zc + 0.5 * h_eff[:, None] * k1
        Jm = tsys.jacobian(z_mid)
        Ftm = np.zeros_like(Ft)
        Ftm[:, nstat] = du_dt(idx, t_mid)
        k2 = _solve_batch(Jm, -Ftm)
        z_try = zc + h_eff[:, None] * k2
        t_try = tc + h_eff

        # Newton corrector at t_try
        u_try = u_of(idx, t_try)
        converged = np.zeros(len(idx), dtype=bool)
        for _ in range(cfg.max_corrector_iters):
            F = tsys.residual(z_try, u_try)
            Jc = tsys.jacobian(z_try)
            delta = _solve_batch(Jc, F)
            z_try = z_try - delta
            dn = np.max(np.abs(delta), axis=1)
            zn = 1.0 + np.max(np.abs(z_try), axis=1)
            converged |= dn <= cfg.newton_tol * zn
            if np.all(converged):
                break
        bad = ~np.isfinite(z_try).all(axis=1)
        diverged = np.max(np.abs(z_try), axis=1, initial=0.0) > cfg.divergence_bound
        success = converged & ~bad
        fail = ~success

        gi = idx[success & ~diverged]
        z[gi] = z_try[success & ~diverged]
        t[gi] = t_try[success & ~diverged]
        streak[gi] += 1
        grow = gi[streak[gi] >= cfg.expand_after]
        h[grow] = np.minimum(h[grow] * cfg.step_expand, cfg.max_step)
        streak[grow] = 0

        di = idx[success & diverged]
        status[di] = STATUS_DIVERGED
        active[di] = False

        fi = idx[fail]
        h[fi] *= cfg.step_contract
        streak[fi] = 0
        under = fi[h[fi] < cfg.min_step]
        status[under] = np.where(
            np.isfinite(z[under]).all(axis=1), STATUS_UNDERFLOW, STATUS_CORRECTOR)
        active[under] = False

        steps[idx] += 1
        overrun = idx[steps[idx] >= cfg.max_steps]
        overrun = overrun[active[overrun]]
        status[overrun] = STATUS_MAX_STEPS
        active[overrun] = False

        done = np.flatnonzero(active & (t >= 1.0 - 1e-14))
        status[done] = STATUS_SUCCESS
        active[done] = False
    return z, status, steps


def track_batch(tsys, z0, u_from, u_to, cfg=None, rng=None, gamma=None):
    """Track a batch of paths between per-path parameter pairs.

    Parameters
    ----------
    z0 : (P, n_var) complex start solutions at u_from
    u_from, u_to : (P, n_x) complex parameter endpoints
    gamma : optional per-path complex arc bend; drawn from rng when absent

    Returns (z1, status, steps) with status strings per path.
    """
    cfg = (cfg or TrackerConfig()).validate()
    z0 = np.atleast_2d(np.asarray(z0, dtype=complex))
    u_from = np.atleast_2d(np.asarray(u_from, dtype=complex))
    u_to = np.atleast_2d(np.asarray(u_to, dtype=complex))
    P = z0.shape[0]
    if u_from.shape[0] == 1 and P > 1:
        u_from = np.broadcast_to(u_from, (P, u_from.shape[1])).copy()
    if u_to.shape[0] == 1 and P > 1:
        u_to = np.broadcast_to(u_to, (P, u_to.shape[1])).copy()
    if gamma is None:
        rng = rng or np.random.default_rng()
        gamma = _complex_normal(rng, P, scale=cfg.gamma_scale / math.sqrt(2))
    gamma = np.broadcast_to(np.asarray(gamma, dtype=complex), (P,)).copy()
    z_out = z0.copy()
    status = np.array([""] * P, dtype=object)
    steps = np.zeros(P, dtype=int)
    same = np.max(np.abs(u_to - u_from), axis=1) <= 1e-15
    if np.any(same):
        status[same] = STATUS_SUCCESS
    todo = np.flatnonzero(~same)
    for sl in _chunk_sizes(len(todo), tsys.n_eq, tsys.n_var):
        part = todo[sl]
        z1, st, sp = _track_chunk(tsys, z_out[part], u_from[part], u_to[part],
                                  cfg, gamma[part])
        z_out[part] = z1
        status[part] = st
        steps[part] = sp
    return z_out, status, steps


def newton_polish(tsys, z, u, tol=5e-14, iters=12):
    """Batched Newton refinement at fixed parameters.

    Returns (z, rel_residual, contraction) where contraction is the ratio
    of the last two correction norms (quadratic convergence proxy).
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex)).copy()
    u = np.atleast_2d(np.asarray(u, dtype=complex))
    if u.shape[0] == 1 and z.shape[0] > 1:
        u = np.broadcast_to(u, (z.shape[0], u.shape[1]))
    prev = np.full(z.shape[0], np.inf)
    contraction = np.full(z.shape[0], np.inf)
    for _ in range(iters):
        F = tsys.residual(z, u)
        J = tsys.jacobian(z)
        delta = _solve_batch(J, F)
        good = np.isfinite(delta).all(axis=1)
        z[good] -= delta[good]
        dn = np.max(np.abs(delta), axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            contraction = np.where(prev > 0, dn / prev, 0.0)
        prev = dn
        if np.all(dn[good] <= tol * (1.0 + np.max(np.abs(z[good]), axis=1, initial=0.0))):
            break
    rel = tsys.core_residual_norm(z, u)
    return z, rel, contraction


def track_path(system, start: SystemPoint, u_from, u_to, cfg=None,
               slice_=None, rng=None):
    """Track one solution between two parameter points.

    Returns ``(point, status)``; ``point`` is None unless status is
    ``"success"``.  Failures are data, not exceptions.
    """
    cfg = (cfg or TrackerConfig()).validate()
    tsys = TrackedSystem(system, slice_)
    z0 = start.to_vector()
    z1, status, _ = track_batch(tsys, z0[None, :], np.asarray(u_from, complex).reshape(1, -1),
                                np.asarray(u_to, complex).reshape(1, -1), cfg, rng=rng)
    if status[0] != STATUS_SUCCESS:
        return None, str(status[0])
    z1, rel, _ = newton_polish(tsys, z1, np.asarray(u_to, complex).reshape(1, -1),
                               tol=cfg.polish_tol)
    if rel[0] > cfg.residual_tol:
        return None, STATUS_CORRECTOR
    return SystemPoint.from_vector(system, z1[0]), STATUS_SUCCESS


# ---------------------------------------------------------------------------
# solution containers
# ---------------------------------------------------------------------------

@dataclass
class CriticalSolution:
    """One complex critical point with its multipliers and diagnostics."""

    X: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    residual: float
    is_real: bool
    distance_sq: complex
    contraction: float = math.nan

    def real_matrix(self):
        return self.X.real.copy()

    def sort_key(self):
        return (round(self.distance_sq.real, 10), round(self.distance_sq.imag, 10),
                tuple(np.round(self.X.real, 9).ravel()),
                tuple(np.round(self.X.imag, 9).ravel()))


@dataclass
class SolutionSet:
    """Deduplicated critical points of one (U, r, constraints) instance."""

    system: CriticalSystem
    U: np.ndarray                 # flat parameter vector the solutions solve
    solutions: list
    stats: dict = field(default_factory=dict)
    slice: MultiplierSlice | None = None
    trace_test: bool | None = None

    @property
    def count(self):
        return len(self.solutions)

    def x_matrix(self):
        """(count, m*n) stack of the x parts."""
        return np.array([s.X.reshape(-1) for s in self.solutions])

    def real_solutions(self):
        return [s for s in self.solutions if s.is_real]

    def to_json_dict(self):
        sys_ = self.system

        def cplx(arr):
            arr = np.asarray(arr, dtype=complex).reshape(-1)
            return [[float(v.real), float(v.imag)] for v in arr]

        return {
            "schema": "lowrankzeros/solution-set-v1",
            "instance": {
                "m": sys_.m, "n": sys_.n, "r": sys_.r,
                "pattern": sys_.pattern.to_json_dict() if sys_.pattern else None,
                "general_constraints": (
                    None if sys_.pattern or sys_.n_mu == 0
                    else [cplx(c) for c in sys_.constraints]),
                "U": cplx(self.U),
            },
            "count": self.count,
            "solutions": [
                {
                    "X": cplx(s.X),
                    "lambda": cplx(s.lam),
                    "mu": cplx(s.mu),
                    "residual": float(s.residual),
                    "is_real": bool(s.is_real),
                    "distance_sq": [float(s.distance_sq.real), float(s.distance_sq.imag)],
                }
                for s in self.solutions
            ],
            "stats": _jsonable(self.stats),
            "trace_test": self.trace_test,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_json_dict(), **kw)

    @classmethod
    def from_json_dict(cls, obj):
        inst = obj["instance"]
        m, n, r = inst["m"], inst["n"], inst["r"]

        def uncplx(pairs):
            return np.array([complex(a, b) for a, b in pairs])

        if inst.get("pattern"):
            constraints = ZeroPattern.from_json_dict(inst["pattern"])
        elif inst.get("general_constraints"):
            constraints = [uncplx(c).reshape(m, n) for c in inst["general_constraints"]]
        else:
            constraints = None
        system = build_system(m, n, r, constraints)
        U = uncplx(inst["U"])
        sols = []
        for rec in obj["solutions"]:
            sols.append(CriticalSolution(
                X=uncplx(rec["X"]).reshape(m, n),
                lam=uncplx(rec["lambda"]),
                mu=uncplx(rec["mu"]),
                residual=float(rec["residual"]),
                is_real=bool(rec["is_real"]),
                distance_sq=complex(rec["distance_sq"][0], rec["distance_sq"][1]),
            ))
        return cls(system=system, U=U, solutions=sols, stats=obj.get("stats", {}),
                   trace_test=obj.get("trace_test"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _distance_sq(u, x):
    d = u - x
    return complex(np.sum(d * d))


def _is_real_x(x, tau):
    return bool(np.max(np.abs(x.imag)) <= tau * (1.0 + np.max(np.abs(x))))


def _make_solutions(system, Z, U, rel, contraction, tau_real):
    out = []
    nx, nl = system.n_x, system.n_lam
    U = np.atleast_2d(U)
    if U.shape[0] == 1 and Z.shape[0] > 1:
        U = np.broadcast_to(U, (Z.shape[0], U.shape[1]))
    for p in range(Z.shape[0]):
        x = Z[p, :nx]
        X = x.reshape(system.m, system.n)
        out.append(CriticalSolution(
            X=X,
            lam=Z[p, nx:nx + nl].copy(),
            mu=Z[p, nx + nl:].copy(),
            residual=float(rel[p]),
            is_real=_is_real_x(X, tau_real),
            distance_sq=_distance_sq(U[p], x),
            contraction=float(contraction[p]),
        ))
    return out


def _dedup_merge(known_x, new_z, nx, tol):
    """Indices of rows of new_z whose x part is not yet in known_x."""
    fresh = []
    for p in range(new_z.shape[0]):
        x = new_z[p, :nx]
        scale = 1.0 + np.max(np.abs(x))
        dup = False
        for q in known_x:
            if np.max(np.abs(q - x)) <= tol * scale:
                dup = True
                break
        if not dup:
            for f in fresh:
                if np.max(np.abs(new_z[f, :nx] - x)) <= tol * scale:
                    dup = True
                    break
        if not dup:
            fresh.append(p)
    return fresh


# ---------------------------------------------------------------------------
# component-aware seeding
# ---------------------------------------------------------------------------

def _support_seeds(system, rng):
    """Support descriptions, one per known component type (besides the
    generic samples)."""
    pat = system.pattern
    out = []
    if pat is None:
        return out
    m, n, r = system.m, system.n, system.r
    if r == 1:
        for cov in sorted(minimal_covers(pat),
                          key=lambda c: (sorted(c.rows), sorted(c.cols))):
            rows = tuple(i for i in range(m) if i not in cov.rows)
            cols = tuple(j for j in range(n) if j not in cov.cols)
            if rows and cols:
                out.append([(rows, cols, 1)])
        return out
    blocks = complement_blocks(pat)
    if blocks and len(blocks) > 1:
        caps = [min(len(rw), len(cl)) for rw, cl in blocks]

        def comps(total, caps):
            if len(caps) == 1:
                return [(total,)] if 0 <= total <= caps[0] else []
            return [(h,) + rest for h in range(min(total, caps[0]) + 1)
                    for rest in comps(total - h, caps[1:])]

        for comp in comps(r, caps):
            out.append([(rw, cl, ri) for (rw, cl), ri in zip(blocks, comp)])
    return out


def _subspace_seed(tsys, U0, cover, rng):
    """Try to seed the linear component carved out by a minimal cover whose
    free block has dimension <= r: the critical point is the projection of
    U0, and the multipliers solve a linear system.  Returns a solution
    vector or None when the candidate is not a regular critical point."""
    sys_ = tsys.system
    m, n = sys_.m, sys_.n
    mask = np.ones((m, n), dtype=bool)
    for i in cover.rows:
        mask[i, :] = False
    for j in cover.cols:
        mask[:, j] = False
    x_star = np.where(mask.reshape(-1), U0, 0.0)
    X = x_star.reshape(1, m, n)
    grads = sys_.minor_gradients(X)[0]
    cols = [grads.T]
    if sys_.n_mu:
        cols.append(sys_.constraints.reshape(sys_.n_mu, -1).T)
    A = np.concatenate(cols, axis=1)
    rhs = U0 - x_star
    if tsys.slice is not None:
        srow = np.zeros((tsys.slice.dim, A.shape[1]), dtype=complex)
        srow[:, :sys_.n_lam] = tsys.slice.C
        A = np.concatenate([A, srow], axis=0)
        rhs = np.concatenate([rhs, tsys.slice.b])
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.max(np.abs(A @ sol - rhs)) > 1e-8 * (1.0 + np.max(np.abs(rhs))):
        return None
    z = np.concatenate([x_star, sol])
    return z


def _regular(tsys, z):
    J = tsys.jacobian(z[None, :])[0]
    sv = np.linalg.svd(J, compute_uv=False)
    return sv[-1] > 1e-8 * max(1.0, sv[0])


def initial_solutions(system, cfg, rng):
    """Common base parameter U0 plus verified start solutions, one per
    reachable component.  Returns (tsys, U0, Z (P, n_var), notes)."""
    notes = []
    primary_supports = None
    support_list = _support_seeds(system, rng)
    if system.r == 1 and system.pattern is not None:
        if not support_list:
            raise SeedError("pattern admits no rank-one points")
        primary_supports = support_list[0]
        support_list = support_list[1:]
    U0, p0 = seed_pair(system, rng) if primary_supports is None else \
        seed_pair(system, rng, supports=primary_supports)
    slice_ = multiplier_slice(system, rng, lam0=p0.lam)
    tsys = TrackedSystem(system, slice_)
    z0 = p0.to_vector()
    if not _regular(tsys, z0):
        raise SeedError("primary seed is singular")
    starts = [z0]

    # a second generic sample with the roles of the factors flipped can land
    # on a different component; harmless duplicate otherwise
    extra = []
    if primary_supports is None and system.n_mu:
        for flip in (False, True):
            try:
                uk, pk = seed_pair(system, rng, flip_first=flip)
            except SeedError:
                continue
            extra.append((uk, pk.to_vector()))
    for supports in support_list:
        try:
            uk, pk = seed_pair(system, rng, supports=supports)
        except SeedError as exc:
            notes.append(f"support seed failed: {exc}")
            continue
        extra.append((uk, pk.to_vector()))
    if extra:
        zs = np.array([z for _, z in extra])
        ufrom = np.array([u for u, _ in extra])
        uto = np.broadcast_to(U0, ufrom.shape).copy()
        z1, status, _ = track_batch(tsys, zs, ufrom, uto, cfg, rng=rng)
        ok = status == STATUS_SUCCESS
        if np.any(ok):
            z1, rel, _ = newton_polish(tsys, z1[ok], U0[None, :], tol=cfg.polish_tol)
            for p in range(z1.shape[0]):
                if rel[p] <= cfg.residual_tol and _regular(tsys, z1[p]):
                    starts.append(z1[p])

    # projections onto cover subspaces that are components of the variety
    if system.pattern is not None and system.r >= 2:
        for cov in sorted(minimal_covers(system.pattern),
                          key=lambda c: (sorted(c.rows), sorted(c.cols))):
            bm = system.m - len(cov.rows)
            bn = system.n - len(cov.cols)
            if min(bm, bn) < 1 or min(bm, bn) > system.r:
                continue
            z = _subspace_seed(tsys, U0, cov, rng)
            if z is None:
                continue
            z_p, rel, _ = newton_polish(tsys, z[None, :], U0[None, :], tol=cfg.polish_tol)
            if rel[0] <= cfg.residual_tol and _regular(tsys, z_p[0]):
                starts.append(z_p[0])

    Z = np.array(starts)
    fresh = _dedup_merge([], Z, system.n_x, cfg.dedup_tol)
    return tsys, U0, Z[fresh], notes


# ---------------------------------------------------------------------------
# monodromy
# ---------------------------------------------------------------------------

def monodromy_solve(system: CriticalSystem, cfg: TrackerConfig | None = None,
                    rng=None, stop_rule=None, run_trace_test=False) -> SolutionSet:
    """Populate the solution set of one generic complex parameter point.

    Transports the known solutions around random triangular loops in
    parameter space until ``stop_rule`` fires (default: ``stable_loops``
    consecutive loops with no new solution).  The returned count is the
    candidate Euclidean distance degree of the instance.
    """
    cfg = (cfg or TrackerConfig()).validate()
    rng = rng if rng is not None else np.random.default_rng()
    tsys, U0, Z, notes = initial_solutions(system, cfg, rng)
    scale = np.max(np.abs(U0))
    known = [Z[p] for p in range(Z.shape[0])]
    known_x = [z[:system.n_x] for z in known]
    loops = stable = 0
    failures = 0
    all_failed_retries = 0
    while stable < cfg.stable_loops and loops < cfg.max_loops:
        if stop_rule is not None and stop_rule(loops, stable, len(known)):
            break
        u1 = _complex_normal(rng, system.n_x, scale=scale / math.sqrt(2))
        u2 = _complex_normal(rng, system.n_x, scale=scale / math.sqrt(2))
        Zc = np.array(known)
        statuses = None
        for ua, ub in ((U0, u1), (u1, u2), (u2, U0)):
            Zc, statuses, _ = track_batch(
                tsys, Zc, ua[None, :], ub[None, :], cfg, rng=rng)
            good = statuses == STATUS_SUCCESS
            failures += int(np.sum(~good))
            Zc = Zc[good]
            if Zc.shape[0] == 0:
                break
        loops += 1
        if Zc.shape[0] == 0:
            all_failed_retries += 1
            if all_failed_retries > cfg.leg_retries:
                notes.append("monodromy aborted: repeated all-path failures")
                break
            continue
        Zc, rel, _ = newton_polish(tsys, Zc, U0[None, :], tol=cfg.polish_tol)
        ok = rel <= cfg.residual_tol
        Zc = Zc[ok]
        fresh = _dedup_merge(known_x, Zc, system.n_x, cfg.dedup_tol)
        if fresh:
            for p in fresh:
                known.append(Zc[p])
                known_x.append(Zc[p, :system.n_x])
            stable = 0
        else:
            stable += 1
    Z = np.array(known)
    Z, rel, contraction = newton_polish(tsys, Z, U0[None, :], tol=cfg.polish_tol)
    sols = _make_solutions(system, Z, U0[None, :], rel, contraction, cfg.tau_real)
    sols = sorted(sols, key=CriticalSolution.sort_key)
    stats = {
        "loops": loops,
        "stable_loops_at_stop": stable,
        "path_failures": failures,
        "seed_notes": notes,
        "stopped_by_cap": loops >= cfg.max_loops,
    }
    sset = SolutionSet(system=system, U=U0, solutions=sols, stats=stats, slice=tsys.slice)
    if run_trace_test:
        sset.trace_test = trace_test(sset, cfg, rng)
        sset.stats["trace_test"] = sset.trace_test
    return sset


def trace_test(solset: SolutionSet, cfg=None, rng=None, rel_tol=1e-6):
    """Heuristic completeness check: along an affine parameter line the
    coordinate sum of the full solution set moves affinely.  Returns True
    when the affine relation holds, False when it visibly fails, None when
    paths failed and nothing can be said."""
    cfg = (cfg or TrackerConfig()).validate()
    rng = rng if rng is not None else np.random.default_rng()
    system = solset.system
    tsys = TrackedSystem(system, solset.slice)
    U0 = solset.U
    direction = _complex_normal(rng, system.n_x, scale=np.max(np.abs(U0)))
    Z0 = np.array([s.X.reshape(-1) for s in solset.solutions])
    Zfull = np.array([np.concatenate([s.X.reshape(-1), s.lam, s.mu])
                      for s in solset.solutions])
    traces = [Z0.sum(axis=0)]
    for tval in (0.5, 1.0):
        target = U0 + tval * direction
        Zt, status, _ = track_batch(tsys, Zfull, U0[None, :], target[None, :],
                                    cfg, rng=rng, gamma=np.zeros(Zfull.shape[0]))
        if not np.all(status == STATUS_SUCCESS):
            return None
        Zt, rel, _ = newton_polish(tsys, Zt, target[None, :], tol=cfg.polish_tol)
        if np.any(rel > cfg.residual_tol):
            return None
        traces.append(Zt[:, :system.n_x].sum(axis=0))
    lin = traces[0] + (traces[2] - traces[0]) * 0.5
    err = np.max(np.abs(traces[1] - lin))
    scale = max(np.max(np.abs(traces[0])), np.max(np.abs(traces[2])), 1.0)
    return bool(err <= rel_tol * scale)


# ---------------------------------------------------------------------------
# parameter homotopy to targets
# ---------------------------------------------------------------------------

def transport_batch(solset: SolutionSet, targets, cfg=None, rng=None):
    """Carry the base solution set to many targets in one batched run.

    ``targets``: (T, n_x) complex parameters, already scaled O(1).
    Returns (Z (T, count, n_var), ok (T, count) bool).
    """
    cfg = (cfg or TrackerConfig()).validate()
    rng = rng if rng is not None else np.random.default_rng()
    system = solset.system
    tsys = TrackedSystem(system, solset.slice)
    targets = np.atleast_2d(np.asarray(targets, dtype=complex))
    T = targets.shape[0]
    cnt = solset.count
    Zbase = np.array([np.concatenate([s.X.reshape(-1), s.lam, s.mu])
                      for s in solset.solutions])
    Zall = np.tile(Zbase, (T, 1))
    u_to = np.repeat(targets, cnt, axis=0)
    u_from = np.broadcast_to(solset.U, (T * cnt, system.n_x)).copy()
    Z1, status, _ = track_batch(tsys, Zall, u_from, u_to, cfg, rng=rng)
    ok = status == STATUS_SUCCESS
    for attempt in range(cfg.target_retries):
        bad = np.flatnonzero(~ok)
        if bad.size == 0:
            break
        retry_cfg = TrackerConfig(**{**asdict(cfg), "initial_step": cfg.initial_step / 2})
        Zr, st, _ = track_batch(tsys, Zall[bad], u_from[bad], u_to[bad],
                                retry_cfg, rng=rng)
        rgood = st == STATUS_SUCCESS
        Z1[bad[rgood]] = Zr[rgood]
        ok[bad[rgood]] = True
    Z1p, rel, _ = newton_polish(tsys, Z1, u_to, tol=cfg.polish_tol)
    ok &= rel <= cfg.residual_tol
    return Z1p.reshape(T, cnt, system.n_var), ok.reshape(T, cnt)


def solve_for_target(system: CriticalSystem, solset: SolutionSet, U_target,
                     cfg=None, rng=None) -> SolutionSet:
    """Transport a complete base solution set to a concrete data matrix.

    The target is rescaled to unit size for tracking and the endpoint
    solutions are rescaled back (x by c, lambda by c^(1-r), mu by c).
    """
    cfg = (cfg or TrackerConfig()).validate()
    rng = rng if rng is not None else np.random.default_rng()
    U_target = np.asarray(U_target, dtype=complex).reshape(-1)
    if U_target.size != system.n_x:
        raise ValueError("target has wrong shape")
    c = np.max(np.abs(U_target))
    if c == 0:
        c = 1.0
    Z, ok = transport_batch(solset, (U_target / c)[None, :], cfg, rng)
    Z, ok = Z[0], ok[0]
    nx, nl = system.n_x, system.n_lam
    Zs = Z.copy()
    Zs[:, :nx] *= c
    Zs[:, nx:nx + nl] *= c ** (1 - system.r)
    Zs[:, nx + nl:] *= c
    good = np.flatnonzero(ok)
    tsys = TrackedSystem(system, None)
    rel = tsys.core_residual_norm(Zs[good], U_target[None, :])
    contraction = np.zeros(len(good))
    sols = _make_solutions(system, Zs[good], U_target[None, :], rel,
                           contraction, cfg.tau_real)
    # endpoint collisions indicate a non-generic target
    xs = [s.X.reshape(-1) for s in sols]
    uniq = _dedup_merge([], Zs[good], nx, cfg.dedup_tol)
    collisions = len(xs) - len(uniq)
    sols = sorted((sols[i] for i in uniq), key=CriticalSolution.sort_key)
    stats = {
        "transported": int(solset.count),
        "path_failures": int(solset.count - len(good)),
        "endpoint_collisions": int(collisions),
        "non_generic_target": bool(collisions > 0),
    }
    return SolutionSet(system=system, U=U_target, solutions=sols, stats=stats,
                       slice=solset.slice)


# ---------------------------------------------------------------------------
# real classification and counting
# ---------------------------------------------------------------------------

def polish_real(system: CriticalSystem, X_real, U_real, cfg=None, rng=None):
    """Refine a real critical point on the real restriction of the system.

    Solves real multipliers by least squares, then runs real Newton with a
    fresh real multiplier slice.  Returns (X, residual).
    """
    cfg = (cfg or TrackerConfig()).validate()
    rng = rng if rng is not None else np.random.default_rng()
    X_real = np.asarray(X_real, dtype=float)
    U_real = np.asarray(U_real, dtype=float).reshape(-1)
    x = X_real.reshape(-1)
    grads = system.minor_gradients(X_real[None, :, :].astype(float))[0].real
    cols = [grads.T]
    if system.n_mu:
        cols.append(system.constraints.real.reshape(system.n_mu, -1).T)
    A = np.concatenate(cols, axis=1)
    lam_mu, *_ = np.linalg.lstsq(A, U_real - x, rcond=None)
    d = system.n_lam - system.minor_codim
    slice_ = None
    if d > 0:
        C = rng.standard_normal((d, system.n_lam))
        C /= np.linalg.norm(C, axis=1, keepdims=True)
        slice_ = MultiplierSlice(C=C + 0j, b=(C @ lam_mu[:system.n_lam]) + 0j)
    tsys = TrackedSystem(system, slice_)
    z = np.concatenate([x, lam_mu]).astype(complex)
    z, rel, _ = newton_polish(tsys, z[None, :], U_real[None, :].astype(complex),
                              tol=cfg.polish_tol)
    return z[0, :system.n_x].real.reshape(system.m, system.n), float(rel[0])


def classify_real(solset: SolutionSet, U_real, cfg=None, rng=None):
    """Split a solved set over a real target into its real points.

    Real solutions are truncated to real matrices, re-polished on the real
    system, and sorted by distance.  Returns (real_points, minimizer) where
    each entry is a dict with keys X, distance_sq, residual.

    Raises RuntimeError when no real solution exists (the global minimum
    is always attained, so an empty answer means the set is incomplete).
    """
    cfg = (cfg or TrackerConfig()).validate()
    U_real = np.asarray(U_real, dtype=float).reshape(-1)
    system = solset.system
    reals = []
    for s in solset.solutions:
        if not s.is_real:
            continue
        X = s.X.real.copy()
        if system.pattern is not None:
            for i, j in system.pattern.entries:
                X[i, j] = 0.0
        X, rel = polish_real(system, X, U_real, cfg, rng)
        if system.pattern is not None:
            for i, j in system.pattern.entries:
                X[i, j] = 0.0
        d = float(np.sum((U_real - X.reshape(-1)) ** 2))
        reals.append({"X": X, "distance_sq": d, "residual": rel})
    if not reals:
        raise RuntimeError("no real critical point found; solution set incomplete")
    reals.sort(key=lambda rec: rec["distance_sq"])
    return reals, reals[0]


def conjugate_closure_ok(solset: SolutionSet, tol=None):
    """For a real parameter, solutions must come in conjugate pairs."""
    tol = tol if tol is not None else 1e-6
    xs = [s.X for s in solset.solutions]
    unmatched = list(range(len(xs)))
    while unmatched:
        i = unmatched.pop()
        target = np.conj(xs[i])
        scale = 1.0 + np.max(np.abs(target))
        hit = None
        if np.max(np.abs(xs[i] - target)) <= tol * scale:
            continue  # real solution pairs with itself
        for j in unmatched:
            if np.max(np.abs(xs[j] - target)) <= tol * scale:
                hit = j
                break
        if hit is None:
            return False
        unmatched.remove(hit)
    return True


def validated_envelope(m, n, r, pattern: ZeroPattern | None):
    """Whether the instance class is covered by the validated oracle set."""
    size = pattern.size if pattern else 0
    if min(m, n) > 4 or r > 3 or size > 4:
        return False, "instance beyond validated envelope (size/rank)"
    if r == 1 or pattern is None or size == 0:
        return True, ""
    if is_diagonal_type(pattern):
        return True, ""
    blocks = complement_blocks(pattern)
    if blocks is not None:
        return True, ""
    if r == min(m, n) - 1 and size <= 1:
        return True, ""
    return False, "pattern outside validated envelope; count may be partial"


def ed_degree(m, n, r, pattern: ZeroPattern | None, cfg=None, repeats=3,
              rng=None, run_trace_test=True):
    """Euclidean distance degree by repeated monodromy.

    Runs ``repeats`` independent monodromy solves and returns a report
    dict: the count (maximum over runs), per-run counts, a stability flag,
    and an envelope notice when the instance class is not validated.
    """
    cfg = (cfg or TrackerConfig()).validate()
    rng = rng if rng is not None else np.random.default_rng()
    if pattern is not None and pattern.size == 0:
        pattern = None
    system = build_system(m, n, r, pattern)
    counts = []
    traces = []
    for rep in range(repeats):
        sub = np.random.default_rng(rng.integers(0, 2**63 - 1))
        sset = monodromy_solve(system, cfg, rng=sub,
                               run_trace_test=run_trace_test and rep == 0)
        counts.append(sset.count)
        if sset.trace_test is not None:
            traces.append(sset.trace_test)
    ok, notice = validated_envelope(m, n, r, pattern)
    return {
        "m": m, "n": n, "r": r,
        "pattern": pattern.to_json_dict() if pattern else None,
        "count": max(counts),
        "counts": counts,
        "stable": len(set(counts)) == 1,
        "warning": None if len(set(counts)) == 1 else "unstable count across repeats",
        "validated_envelope": ok,
        "notice": notice or None,
        "trace_test": traces[0] if traces else None,
    }
