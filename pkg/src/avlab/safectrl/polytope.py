"""Polytopic sets {u : A u <= b} and their Chebyshev centers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog


class UnboundedSetError(ValueError):
    pass


@dataclass
class Polytope:
    """Q = {u in R^n : A u <= b}; rows of A must be nonzero."""

    A: np.ndarray  # (m, n)
    b: np.ndarray  # (m,)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("A and b row counts differ")
        norms = np.linalg.norm(self.A, axis=1)
        if self.A.shape[0] and (norms < 1e-12).any():
            raise ValueError("rows of A must be nonzero")

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=np.float64).ravel()
        return bool(np.all(self.A @ u <= self.b + tol))

    def violation(self, u) -> float:
        u = np.asarray(u, dtype=np.float64).ravel()
        return float(np.max(self.A @ u - self.b, initial=0.0))

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        n = len(lo)
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))


@dataclass
class ChebyshevResult:
    center: np.ndarray
    radius: float


def chebyshev_center(q: Polytope) -> ChebyshevResult:
    """Center and radius of the largest ball inscribed in Q.

    max rho s.t. A_i c + rho ||A_i|| <= b_i. The 1-D case is the interval
    midpoint in closed form; higher dimensions go through an LP. The radius
    comes back negative only for empty sets (callers treat that as an
    infeasibility certificate).
    """
    a, b = q.A, q.b
    if q.dim == 1:
        av = a[:, 0]
        ub = np.min(b[av > 0] / av[av > 0]) if (av > 0).any() else np.inf
        lb = np.max(b[av < 0] / av[av < 0]) if (av < 0).any() else -np.inf
        if not np.isfinite(ub) or not np.isfinite(lb):
            raise UnboundedSetError(
                "interval is unbounded; add actuation bounds before centering"
            )
        return ChebyshevResult(np.array([(lb + ub) / 2.0]), float((ub - lb) / 2.0))

    norms = np.linalg.norm(a, axis=1)
    c = np.zeros(q.dim + 1)
    c[-1] = -1.0  # maximize rho
    a_ub = np.hstack([a, norms[:, None]])
    bounds = [(None, None)] * q.dim + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=b, bounds=bounds, method="highs")
    if res.status == 3:
        raise UnboundedSetError(
            "polytope is unbounded; add actuation bounds before centering"
        )
    if not res.success:
        raise ValueError(f"chebyshev LP failed: {res.message}")
    return ChebyshevResult(res.x[: q.dim].copy(), float(res.x[-1]))
