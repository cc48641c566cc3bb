"""Dense strictly-convex QP solver and the minimally invasive safety filter.

The solver is a dual active-set method: start at the unconstrained optimum
and add violated constraints one at a time, dropping blockers whose
multipliers would go negative. Pivoting is deterministic (lowest index), so
active sets are reproducible. Problems here are tiny (n <= ~25), which lets
every iteration re-solve the KKT system directly instead of maintaining
factorizations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polytope import Polytope, chebyshev_center


class QpError(RuntimeError):
    pass


class InfeasibleError(QpError):
    """Carries the most violated row and its margin as a certificate."""

    def __init__(self, message: str, row: int | None = None, violation: float = np.nan):
        super().__init__(message)
        self.row = row
        self.violation = violation


@dataclass
class QpSolution:
    u: np.ndarray
    lam: np.ndarray
    active: np.ndarray  # bool mask over constraint rows
    objective: float
    kkt_residual: float
    iterations: int


def _kkt_solve(P: np.ndarray, a_act: np.ndarray, top: np.ndarray, bot: np.ndarray):
    """Solve [[P, Aᵀ], [A, 0]] [x; y] = [top; bot]."""
    n = P.shape[0]
    k = a_act.shape[0]
    if k == 0:
        return np.linalg.solve(P, top), np.zeros(0)
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = P
    kkt[:n, n:] = a_act.T
    kkt[n:, :n] = a_act
    rhs = np.concatenate([top, bot])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def _kkt_residual(P, q, A, b, u, lam) -> float:
    stat = np.max(np.abs(P @ u + q + A.T @ lam)) if A.size else np.max(np.abs(P @ u + q))
    if A.size:
        slack = A @ u - b
        feas = max(float(np.max(slack, initial=0.0)), 0.0)
        comp = float(np.max(np.abs(lam * slack), initial=0.0))
        dual = max(float(np.max(-lam, initial=0.0)), 0.0)
    else:
        feas = comp = dual = 0.0
    return max(float(stat), feas, comp, dual)


def solve_qp(P: np.ndarray, q: np.ndarray, A: np.ndarray | None = None,
             b: np.ndarray | None = None, max_iter: int | None = None) -> QpSolution:
    """Minimize 0.5 uᵀPu + qᵀu subject to A u <= b. P must be SPD."""
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    q = np.asarray(q, dtype=np.float64).ravel()
    n = P.shape[0]
    if P.shape != (n, n) or q.shape != (n,):
        raise QpError(f"inconsistent shapes P{P.shape} q{q.shape}")
    if np.max(np.abs(P - P.T)) > 1e-10:
        raise QpError("P must be symmetric")
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        raise QpError("P must be positive definite") from None

    if A is None or np.size(A) == 0:
        u = np.linalg.solve(P, -q)
        obj = 0.5 * u @ P @ u + q @ u
        return QpSolution(u, np.zeros(0), np.zeros(0, dtype=bool), float(obj), 0.0, 0)

    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.asarray(b, dtype=np.float64).ravel()
    m = A.shape[0]
    if A.shape[1] != n or b.shape != (m,):
        raise QpError(f"inconsistent constraint shapes A{A.shape} b{b.shape}")

    feas_tol = 1e-10
    dep_tol = 1e-12
    if max_iter is None:
        max_iter = 50 + 10 * (m + n)

    u = np.linalg.solve(P, -q)
    work: list[int] = []      # active row indices
    lam_w: list[float] = []
    iters = 0

    while iters < max_iter:
        iters += 1
        viol = A @ u - b
        viol[work] = 0.0  # active rows are satisfied by construction
        worst = np.where(viol > feas_tol)[0]
        if len(worst) == 0:
            break
        p = int(worst[0])  # lowest index pivot

        lam_p = 0.0
        while True:
            a_act = A[work] if work else np.zeros((0, n))
            z, r = _kkt_solve(P, a_act, A[p], np.zeros(len(work)))
            denom = float(A[p] @ z)
            viol_p = float(A[p] @ u - b[p])
            t2 = viol_p / denom if denom > dep_tol else np.inf
            t1, j_block = np.inf, -1
            for j, (lj, rj) in enumerate(zip(lam_w, r)):
                if rj > dep_tol:
                    tj = lj / rj
                    if tj < t1 - 1e-15:
                        t1, j_block = tj, j
            t = min(t1, t2)
            if not np.isfinite(t):
                raise InfeasibleError(
                    f"QP infeasible: constraint {p} cannot be satisfied "
                    f"(violation {viol_p:.3e})",
                    row=p,
                    violation=viol_p,
                )
            u = u - t * z
            lam_w = [lj - t * rj for lj, rj in zip(lam_w, r)]
            lam_p += t
            if t2 <= t1:
                work.append(p)
                lam_w.append(lam_p)
                break
            del work[j_block]
            del lam_w[j_block]
    else:
        # active-set loop exhausted; distinguish infeasible from stalled
        cheb = chebyshev_center(Polytope(A, b))
        if cheb.radius < 0:
            j = int(np.argmax(A @ cheb.center - b))
            raise InfeasibleError(
                "QP infeasible: empty constraint set", row=j,
                violation=float((A @ cheb.center - b)[j]),
            )
        raise QpError(f"active-set solver exceeded {max_iter} iterations")

    # polish on the final active set for a crisp KKT residual
    if work:
        order = np.array(sorted(work))
        u, lam_act = _kkt_solve(P, A[order], -q, b[order])
        lam = np.zeros(m)
        lam[order] = np.maximum(lam_act, 0.0)
    else:
        lam = np.zeros(m)
    active = lam > 1e-11
    obj = float(0.5 * u @ P @ u + q @ u)
    res = _kkt_residual(P, q, A, b, u, lam)
    return QpSolution(u, lam, active, obj, res, iters)


def qp_filter(u_ref, q: Polytope) -> np.ndarray:
    """Project a reference control onto Q; returns u_ref itself if already safe."""
    u, _ = qp_filter_with_solution(u_ref, q)
    return u


def qp_filter_with_solution(u_ref, q: Polytope):
    u_ref = np.asarray(u_ref, dtype=np.float64).ravel()
    if q.contains(u_ref, tol=1e-12):
        return u_ref.copy(), None
    sol = solve_qp(np.eye(q.dim), -u_ref, q.A, q.b)
    return sol.u, sol


def qp_filter_grad(u_ref, q: Polytope, upstream, solution: QpSolution | None = None):
    """d(loss)/d(u_ref) through the projection, by KKT implicit differentiation.

    The Jacobian at a solution with active set S is the orthogonal projector
    onto the nullspace of A_S. Weak complementarity (a geometrically active
    row with zero multiplier) is flagged and the multiplier-positive active
    set is used, which yields a valid subgradient.
    """
    u_ref = np.asarray(u_ref, dtype=np.float64).ravel()
    upstream = np.asarray(upstream, dtype=np.float64).ravel()
    n = q.dim
    if solution is None:
        _, solution = qp_filter_with_solution(u_ref, q)
    if solution is None:  # interior reference: identity Jacobian
        return upstream.copy(), False

    slack = q.A @ solution.u - q.b
    geom_active = np.abs(slack) < 1e-7
    mult_active = solution.lam > 1e-8
    degenerate = bool(np.any(geom_active & ~mult_active)) or int(mult_active.sum()) > n

    a_s = q.A[mult_active]
    if a_s.shape[0] == 0:
        jac = np.eye(n)
    else:
        gram = a_s @ a_s.T
        try:
            ginv = np.linalg.inv(gram)
        except np.linalg.LinAlgError:
            ginv = np.linalg.pinv(gram)
            degenerate = True
        jac = np.eye(n) - a_s.T @ ginv @ a_s
    return upstream @ jac, degenerate
