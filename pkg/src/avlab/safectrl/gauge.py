"""Gauge (Minkowski-functional) map from the unit infinity-ball onto a polytope.

With Q' = Q - c recentred so that b' = b - A c > 0, the gauge of a
direction d is gamma(d) = max_i (A_i d) / b'_i, and the map sends z with
||z||_inf < 1 to u = c + (||z||_inf / gamma(z)) z. Direction and level sets
are preserved: u - c is a nonnegative multiple of z and
gamma(u - c) = ||z||_inf. Q must contain box rows (actuation bounds) so
gamma(z) > 0 for every z != 0.
"""

from __future__ import annotations

import numpy as np

from .polytope import Polytope


class GaugeError(ValueError):
    pass


def _recentred(q: Polytope, c: np.ndarray) -> np.ndarray:
    b_shift = q.b - q.A @ c
    if (b_shift <= 1e-12).any():
        raise GaugeError("center is not strictly interior to Q")
    return b_shift


def _gauge_of(q: Polytope, b_shift: np.ndarray, d: np.ndarray) -> float:
    return float(np.max((q.A @ d) / b_shift))


def gauge_map(z, q: Polytope, c, tol: float = 1e-9) -> np.ndarray:
    """Map z in the closed unit infinity-ball to a point of Q."""
    z = np.asarray(z, dtype=np.float64).ravel()
    c = np.asarray(c, dtype=np.float64).ravel()
    zmax = float(np.max(np.abs(z), initial=0.0))
    if zmax > 1.0 + tol:
        raise GaugeError(f"||z||_inf = {zmax:.6f} exceeds 1")
    b_shift = _recentred(q, c)
    if zmax == 0.0:
        return c.copy()
    g = _gauge_of(q, b_shift, z)
    if g <= 0.0:
        raise GaugeError(
            "gauge of direction is nonpositive; include actuation box rows in Q"
        )
    return c + (zmax / g) * z


def gauge_unmap(u, q: Polytope, c) -> np.ndarray:
    """Inverse map: recover z in the unit infinity-ball from u in Q."""
    u = np.asarray(u, dtype=np.float64).ravel()
    c = np.asarray(c, dtype=np.float64).ravel()
    b_shift = _recentred(q, c)
    d = u - c
    dmax = float(np.max(np.abs(d), initial=0.0))
    if dmax == 0.0:
        return np.zeros_like(d)
    g = _gauge_of(q, b_shift, d)
    return (g / dmax) * d


def gauge_map_grad(z, q: Polytope, c, upstream, tie_tol: float = 1e-9):
    """d(loss)/dz through the gauge map, off the argmax tie set.

    u(z) = c + ||z||_inf z / gamma(z), so with k the infinity-norm argmax
    (sign s) and j the gauge argmax row,
        J = (||z||_inf/gamma) I + (1/gamma) z s e_kᵀ
            - (||z||_inf/gamma²) z (A_j/b'_j)ᵀ.
    Ties in either argmax are flagged; the lexicographically smallest index
    is used, which returns one valid subgradient.
    """
    z = np.asarray(z, dtype=np.float64).ravel()
    c = np.asarray(c, dtype=np.float64).ravel()
    upstream = np.asarray(upstream, dtype=np.float64).ravel()
    n = len(z)
    b_shift = _recentred(q, c)
    zmax = float(np.max(np.abs(z), initial=0.0))
    if zmax == 0.0:
        # u = c exactly at z = 0; the map is non-differentiable here
        return np.zeros(n), True

    abs_z = np.abs(z)
    k = int(np.argmax(abs_z))
    tie_norm = int(np.sum(abs_z > zmax - tie_tol)) > 1
    s_k = 1.0 if z[k] >= 0 else -1.0

    ratios = (q.A @ z) / b_shift
    g = float(np.max(ratios))
    if g <= 0.0:
        raise GaugeError("gauge of direction is nonpositive")
    j = int(np.argmax(ratios))
    tie_gauge = int(np.sum(ratios > g - tie_tol * max(1.0, abs(g)))) > 1

    grad_norm = np.zeros(n)
    grad_norm[k] = s_k
    grad_gauge = q.A[j] / b_shift[j]
    jac = (zmax / g) * np.eye(n)
    jac += np.outer(z, grad_norm) / g
    jac -= (zmax / g**2) * np.outer(z, grad_gauge)
    return upstream @ jac, bool(tie_norm or tie_gauge)
