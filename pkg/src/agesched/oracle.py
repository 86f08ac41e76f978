"""Brute-force reference solver for the scheduling quadratic programs.

Every subset of inequality constraints is tried as an active set; for each,
the equality-constrained stationarity system is solved directly.  A subset
is accepted when its solution is primal feasible and, for convex problems,
its multipliers are non-negative.  This is exponential in the number of
constraints and only meant for small instances used to cross-check the fast
solvers.

The two-hop objective is bilinear in (t, t_bar) and therefore indefinite.
For it every primal-feasible stationary point is a candidate and the one
with the smallest objective wins: a global minimizer over a bounded
polyhedron is a stationary point of some face, and in the worst case a
vertex, whose system is always non-singular.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import (
    InfeasibleInstanceError,
    FeasibilityReport,
    SingleHopInstance,
    TwoHopInstance,
    validate_two_hop,
)

MAX_SINGLE_HOP_N = 10
MAX_TWO_HOP_N = 5
PIVOT_TOL = 1e-10
STATIONARITY_TOL = 1e-8
PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
UNIQUE_TOL = 1e-8
_CHUNK = 8192


class OracleBoundError(ValueError):
    """Instance is too large for exhaustive enumeration."""


@dataclass(frozen=True, eq=False)
class QpProblem:
    """``min z'Qz + q'z + r`` s.t. ``A z = b`` and ``G z >= h``."""

    quad: np.ndarray
    lin: np.ndarray
    const: float
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    ineq_matrix: np.ndarray
    ineq_rhs: np.ndarray
    strictly_convex: bool = True

    @property
    def dim(self) -> int:
        return self.quad.shape[0]

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(z @ self.quad @ z + self.lin @ z + self.const)


@dataclass(frozen=True, eq=False)
class KktCertificate:
    """Active set and multipliers of the Lagrangian
    ``f - sum_k lam_k (G_k z - h_k) + nu (A z - b)``."""

    active: tuple[int, ...]
    multipliers: np.ndarray  # one per active inequality, same order
    eq_multipliers: np.ndarray
    stationarity_residual: float
    primal_violation: float

    @property
    def min_multiplier(self) -> float:
        return float(self.multipliers.min()) if self.multipliers.size else 0.0

    def full_multipliers(self, m: int) -> np.ndarray:
        lam = np.zeros(m)
        lam[list(self.active)] = self.multipliers
        return lam

    def verify(self, problem: QpProblem, z) -> list[str]:
        """Re-check stationarity, feasibility, dual sign and complementary slackness."""
        z = np.asarray(z, dtype=float)
        G, h = problem.ineq_matrix, problem.ineq_rhs
        lam = self.full_multipliers(G.shape[0])
        grad = 2 * problem.quad @ z + problem.lin
        resid = grad - G.T @ lam + problem.eq_matrix.T @ self.eq_multipliers
        out = []
        if np.max(np.abs(resid), initial=0.0) > STATIONARITY_TOL:
            out.append(f"stationarity residual {np.max(np.abs(resid)):.3g}")
        slack = G @ z - h
        if np.any(slack < -PRIMAL_TOL * np.maximum(1, np.abs(h))):
            out.append(f"inequality violated by {-slack.min():.3g}")
        eq_gap = problem.eq_matrix @ z - problem.eq_rhs
        if np.any(np.abs(eq_gap) > PRIMAL_TOL * np.maximum(1, np.abs(problem.eq_rhs))):
            out.append(f"equality violated by {np.abs(eq_gap).max():.3g}")
        if np.any(lam < -DUAL_TOL):
            out.append(f"negative multiplier {lam.min():.3g}")
        comp = np.abs(lam * slack)
        if np.any(comp > STATIONARITY_TOL * np.maximum(1, np.abs(h))):
            out.append(f"complementary slackness off by {comp.max():.3g}")
        return out


@dataclass(frozen=True, eq=False)
class OracleResult:
    z: np.ndarray
    objective: float
    certificate: KktCertificate
    n_accepted: int


def batched_solve(A: np.ndarray, b: np.ndarray, pivot_tol: float = PIVOT_TOL):
    """Gaussian elimination with partial pivoting over a stack of systems.

    Returns ``(x, ok)``; ``ok[i]`` is False where a pivot fell below
    ``pivot_tol * max(1, max|A_i|)`` and ``x[i]`` is then meaningless.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    B, K, _ = A.shape
    rows = np.arange(B)
    thresh = pivot_tol * np.maximum(1.0, np.abs(A).reshape(B, -1).max(axis=1, initial=0.0))
    ok = np.ones(B, dtype=bool)
    for k in range(K):
        p = k + np.argmax(np.abs(A[:, k:, k]), axis=1)
        Ak = A[rows, k].copy()
        A[rows, k] = A[rows, p]
        A[rows, p] = Ak
        bk = b[rows, k].copy()
        b[rows, k] = b[rows, p]
        b[rows, p] = bk
        piv = A[:, k, k]
        bad = np.abs(piv) <= thresh
        ok &= ~bad
        piv = np.where(bad, 1.0, piv)
        A[:, k, k] = piv
        if k + 1 < K:
            f = A[:, k + 1:, k] / piv[:, None]
            A[:, k + 1:, k:] -= f[:, :, None] * A[:, None, k, k:]
            b[:, k + 1:] -= f * b[:, k:k + 1]
    x = np.zeros_like(b)
    for k in range(K - 1, -1, -1):
        acc = np.einsum("bj,bj->b", A[:, k, k + 1:], x[:, k + 1:])
        x[:, k] = (b[:, k] - acc) / A[:, k, k]
    return x, ok


def _kkt_systems(problem: QpProblem, combos: np.ndarray):
    """Full stationarity systems ``[H, A', -G_W'; A, 0, 0; G_W, 0, 0]``, unknowns ``(z, nu, lam)``."""
    n = problem.dim
    E, e = problem.eq_matrix, problem.eq_rhs
    G, h = problem.ineq_matrix, problem.ineq_rhs
    me = E.shape[0]
    B, s = combos.shape
    K = n + me + s
    M = np.zeros((B, K, K))
    M[:, :n, :n] = 2 * problem.quad
    M[:, :n, n:n + me] = E.T
    M[:, n:n + me, :n] = E
    if s:
        Gw = G[combos]  # (B, s, n)
        M[:, :n, n + me:] = -np.transpose(Gw, (0, 2, 1))
        M[:, n + me:, :n] = Gw
    rhs = np.zeros((B, K))
    rhs[:, :n] = -problem.lin
    rhs[:, n:n + me] = e
    if s:
        rhs[:, n + me:] = h[combos]
    return M, rhs


def _solve_full(problem: QpProblem, combos: np.ndarray):
    n, me = problem.dim, problem.eq_matrix.shape[0]
    sol, ok = batched_solve(*_kkt_systems(problem, combos))
    return sol[:, :n], sol[:, n:n + me], sol[:, n + me:], ok


def _solve_schur(problem: QpProblem, combos: np.ndarray, h_inv: np.ndarray):
    """Eliminate ``z`` through ``H^-1``; the reduced system is singular iff the full one is.

    With ``C = [A; G_W]`` and ``mu = (-nu, lam)``: ``z = H^-1 (C' mu - q)`` and
    ``C H^-1 C' mu = r + C H^-1 q``.
    """
    E, e = problem.eq_matrix, problem.eq_rhs
    G, h = problem.ineq_matrix, problem.ineq_rhs
    me = E.shape[0]
    B, s = combos.shape
    C = np.concatenate((np.broadcast_to(E, (B,) + E.shape), G[combos]), axis=1)
    r = np.concatenate((np.broadcast_to(e, (B, me)), h[combos]), axis=1)
    CH = C @ h_inv
    S = CH @ np.transpose(C, (0, 2, 1))
    mu, ok = batched_solve(S, r + CH @ problem.lin)
    z = np.einsum("bkn,bk->bn", CH, mu) - h_inv @ problem.lin
    return z, -mu[:, :me], mu[:, me:], ok


def _active_set_chunks(m: int, max_size: int):
    for size in range(0, min(m, max_size) + 1):
        it = itertools.combinations(range(m), size)
        while True:
            block = list(itertools.islice(it, _CHUNK))
            if not block:
                break
            yield np.array(block, dtype=int).reshape(len(block), size)


def enumerate_active_sets(problem: QpProblem) -> OracleResult:
    """Exhaustive active-set search; see the module docstring."""
    n = problem.dim
    me = problem.eq_matrix.shape[0]
    G, h = problem.ineq_matrix, problem.ineq_rhs
    E, e = problem.eq_matrix, problem.eq_rhs
    m = G.shape[0]
    h_tol = PRIMAL_TOL * np.maximum(1.0, np.abs(h))
    e_tol = PRIMAL_TOL * np.maximum(1.0, np.abs(e))
    H = 2 * problem.quad
    h_inv = None
    if np.linalg.cond(H) < 1e8:
        h_inv = np.linalg.inv(H)

    found = []  # per chunk: (order, z, nu, lam, combos, objective, dual_ok, slack)
    order = 0
    for combos in _active_set_chunks(m, n - me):
        if h_inv is not None:
            z, nu, lam, ok = _solve_schur(problem, combos, h_inv)
        else:
            z, nu, lam, ok = _solve_full(problem, combos)
        slack = z @ G.T - h
        keep = ok & np.all(slack >= -h_tol, axis=1)
        if me:
            keep &= np.all(np.abs(z @ E.T - e) <= e_tol, axis=1)
        dual = np.all(lam >= -DUAL_TOL, axis=1)
        if problem.strictly_convex:
            keep &= dual
        idx = np.flatnonzero(keep)
        if idx.size:
            zk = z[idx]
            obj = np.einsum("bi,ij,bj->b", zk, problem.quad, zk) + zk @ problem.lin + problem.const
            found.append((order + idx, zk, nu[idx], lam[idx], combos[idx], obj, dual[idx],
                          slack[idx]))
        order += combos.shape[0]

    if not found:
        raise InfeasibleInstanceError(FeasibilityReport(
            False, None, "no_feasible_point", None,
            "infeasible: no active set yields a feasible point"))

    # flatten per-chunk arrays; active sets differ in size so keep them per row
    rows = [(f, i) for f in found for i in range(f[0].size)]
    keys = np.concatenate([f[0] for f in found])
    zs = np.concatenate([f[1] for f in found])
    objs = np.concatenate([f[5] for f in found])
    duals = np.concatenate([f[6] for f in found])

    if problem.strictly_convex:
        pick = int(np.argmin(keys))
        spread = np.max(np.abs(zs - zs[pick]))
        if spread > UNIQUE_TOL * max(1.0, np.max(np.abs(zs[pick]))):
            raise AssertionError(f"strictly convex problem has distinct KKT points "
                                 f"(spread {spread:.3g})")
    else:
        fmin = objs.min()
        ties = np.flatnonzero(objs <= fmin + 1e-9 * max(1.0, abs(fmin)))
        pick = min(ties, key=lambda i: (not duals[i], tuple(np.round(zs[i], 9)), keys[i]))

    f, i = rows[pick]
    active = tuple(int(a) for a in f[4][i])
    lam = np.array(f[3][i])
    nu = np.array(f[2][i])
    z = np.array(f[1][i])
    grad = 2 * problem.quad @ z + problem.lin
    resid = grad + E.T @ nu - G[list(active)].T @ lam
    cert = KktCertificate(active, lam, nu, float(np.max(np.abs(resid), initial=0.0)),
                          float(max(0.0, -f[7][i].min(initial=0.0))))
    return OracleResult(z, float(f[5][i]), cert, int(keys.size))


# ---------------------------------------------------------------------------
# Problem builders
# ---------------------------------------------------------------------------


def _gap_problem(inst: SingleHopInstance, service: bool) -> QpProblem:
    n, d, T = inst.n, inst.delay, inst.horizon
    dim = n + 1
    rows = [np.concatenate((np.ones(k), np.zeros(dim - k))) for k in range(1, n + 1)]
    rhs = list(inst.arrivals + np.arange(1, n + 1) * d)
    if service:
        for i in range(1, n):
            rows.append(np.eye(dim)[i])
            rhs.append(2 * d)
        rows.append(np.eye(dim)[n])
        rhs.append(d)
    return QpProblem(np.eye(dim), np.zeros(dim), 0.0,
                     np.ones((1, dim)), np.array([T + n * d]),
                     np.array(rows), np.array(rhs), strictly_convex=True)


def gap_problem(inst: SingleHopInstance) -> QpProblem:
    """Minimize ``sum(x**2)`` over gaps with energy and service-time rows."""
    return _gap_problem(inst, service=True)


def relaxed_gap_problem(inst: SingleHopInstance) -> QpProblem:
    """Same as :func:`gap_problem` with only the energy-causality rows."""
    return _gap_problem(inst, service=False)


def _squares_to_quadratic(dim, terms):
    """``sum_j w_j (a_j.z + c_j)^2`` as ``(Q, q, r)``; terms are ``(w, a, c)``."""
    Q = np.zeros((dim, dim))
    q = np.zeros(dim)
    r = 0.0
    for w, a, c in terms:
        Q += w * np.outer(a, a)
        q += 2 * w * c * a
        r += w * c * c
    return Q, q, r


def two_hop_problem(inst: TwoHopInstance) -> QpProblem:
    """Total-age QP in ``z = (t_1..t_N, t_bar_1..t_bar_N)`` with all two-hop rows."""
    n = inst.n
    d, db, T = inst.source_delay, inst.relay_delay, inst.horizon
    dim = 2 * n
    I = np.eye(dim)
    t = lambda i: I[i]          # noqa: E731
    tb = lambda i: I[n + i]     # noqa: E731
    zero = np.zeros(dim)
    terms = []
    for i in range(n):
        prev = t(i - 1) if i > 0 else zero
        terms.append((1.0, tb(i) - prev, db))
        terms.append((-1.0, tb(i) - t(i), db))
    terms.append((1.0, -t(n - 1), T))
    Q, q, r = _squares_to_quadratic(dim, terms)

    rows, rhs = [], []
    for i in range(n):
        rows.append(t(i)); rhs.append(inst.source_arrivals[i])
    for i in range(n):
        rows.append(tb(i)); rhs.append(inst.relay_arrivals[i])
    for i in range(n):
        rows.append(tb(i) - t(i)); rhs.append(d)
    for i in range(n - 1):
        rows.append(t(i + 1) - tb(i)); rhs.append(db)
    rows.append(-tb(n - 1)); rhs.append(db - T)
    return QpProblem(Q, q, r, np.zeros((0, dim)), np.zeros(0),
                     np.array(rows), np.array(rhs), strictly_convex=False)


def _check_bound(n, bound):
    if n > bound:
        raise OracleBoundError(f"oracle enumeration is limited to N <= {bound}, got N={n}")


def qp_solve(inst: SingleHopInstance):
    """Optimal gaps by enumeration: ``(x, objective, certificate)``."""
    _check_bound(inst.n, MAX_SINGLE_HOP_N)
    res = enumerate_active_sets(gap_problem(inst))
    return res.z, res.objective, res.certificate


def qp_solve_pe(inst: SingleHopInstance):
    """Like :func:`qp_solve` but without the service-time rows."""
    _check_bound(inst.n, MAX_SINGLE_HOP_N)
    res = enumerate_active_sets(relaxed_gap_problem(inst))
    return res.z, res.objective, res.certificate


def qp_solve_two_hop(inst: TwoHopInstance):
    """Direct two-hop optimum: ``(t, t_bar, objective, certificate)``.

    The optimizer need not be unique; ties go to the lexicographically
    smallest ``(t, t_bar)``.
    """
    _check_bound(inst.n, MAX_TWO_HOP_N)
    res = enumerate_active_sets(two_hop_problem(inst))
    n = inst.n
    return res.z[:n], res.z[n:], res.objective, res.certificate


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------


def _snap(values, grid):
    return np.round(np.asarray(values) / grid) * grid if grid else np.asarray(values)


def random_instance(seed: int, n: int, kind: str = "single_hop", spread: float = 1.0,
                    slack: float = 2.0, grid: float | None = None):
    """Reproducible feasible instance.

    Arrivals are sorted uniforms on ``[0, spread * n * delay]``; the horizon is
    the smallest feasible one plus a uniform slack of up to ``slack`` delays.
    ``grid`` snaps every number to a lattice, which produces ties and
    degenerate active sets.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    if kind == "single_hop":
        d = float(_snap(rng.uniform(0.5, 3.0), grid)) or float(grid or 0.5)
        arrivals = np.sort(_snap(rng.uniform(0, spread * n * d, n), grid))
        need = float(np.max(arrivals + np.arange(n, 0, -1) * d))
        T = need + float(_snap(rng.uniform(0, slack) * d, grid))
        return SingleHopInstance(arrivals, d, T)
    if kind == "two_hop":
        d = float(_snap(rng.uniform(0.5, 3.0), grid)) or float(grid or 0.5)
        db = float(_snap(rng.uniform(0.5, 3.0), grid)) or float(grid or 0.5)
        src = np.sort(_snap(rng.uniform(0, spread * n * (d + db), n), grid))
        rel = np.sort(_snap(rng.uniform(0, spread * n * (d + db), n), grid))
        k = np.arange(n, 0, -1)
        need = max(np.max(src + k * (d + db)), np.max(rel + k * db + (k - 1) * d))
        T = float(need) + float(_snap(rng.uniform(0, slack) * (d + db), grid))
        inst = TwoHopInstance(src, rel, d, db, T)
        assert validate_two_hop(inst)
        return inst
    raise ValueError(f"unknown instance kind {kind!r}")


__all__ = [
    "QpProblem", "KktCertificate", "OracleResult", "OracleBoundError", "batched_solve",
    "enumerate_active_sets", "gap_problem", "relaxed_gap_problem", "two_hop_problem",
    "qp_solve", "qp_solve_pe", "qp_solve_two_hop", "random_instance",
    "MAX_SINGLE_HOP_N", "MAX_TWO_HOP_N",
]
