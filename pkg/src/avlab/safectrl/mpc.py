"""Finite-horizon tracking MPC for the ACC plant, via the dense QP solver.

The plant is linear, so the N-step tracking problem with per-step barrier
half-spaces and actuation bounds is a convex QP in the control sequence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..sim2d.vehicle import AccState
from .barrier import BarrierParams, safe_control_set
from .polytope import Polytope
from .qp import InfeasibleError, qp_filter, solve_qp


@dataclass
class MpcResult:
    u: float
    fallback: bool
    sequence: np.ndarray


def mpc_baseline(state: AccState, horizon: int, barrier: BarrierParams,
                 v_des: float = 24.0, dt: float = 0.1, rho_u: float = 0.01) -> MpcResult:
    """First input of the N-step safe tracking QP; infeasible horizons fall
    back to filtering zero through the instantaneous safe set."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = horizon
    p = barrier

    # affine prediction: v_k = v + Av_k u; D_k = D0_k + Ad_k u (state before u_k)
    av = np.zeros((n, n))       # Av rows for v_0..v_{n-1}
    ad = np.zeros((n, n))
    d0 = np.zeros(n)
    d0[0] = state.d
    for k in range(1, n):
        av[k] = av[k - 1]
        av[k, k - 1] += dt
        ad[k] = ad[k - 1] - dt * av[k - 1]
        ad[k, k - 1] -= 0.5 * dt * dt
        d0[k] = d0[k - 1] + (state.v0 - state.v) * dt

    # post-step speeds v_1..v_n enter the cost
    av_post = np.zeros((n, n))
    for k in range(n):
        av_post[k, : k + 1] = dt
    cost_const = state.v - v_des
    qp_p = 2.0 * (av_post.T @ av_post + rho_u * np.eye(n))
    qp_q = 2.0 * av_post.T @ np.full(n, cost_const)

    rows, rhs = [], []
    eye = np.eye(n)
    for k in range(n):
        rows.append(eye[k])
        rhs.append(p.u_max)
        rows.append(-eye[k])
        rhs.append(p.u_max)
        # barrier condition at predicted step k, linear in the sequence
        coeff = p.tau_h * eye[k] + (1.0 + p.alpha * p.tau_h) * av[k] - p.alpha * ad[k]
        rows.append(coeff)
        rhs.append((state.v0 - state.v) + p.alpha * (d0[k] - p.tau_h * state.v))
    a_mat = np.vstack(rows)
    b_vec = np.asarray(rhs)

    try:
        sol = solve_qp(qp_p, qp_q, a_mat, b_vec)
        return MpcResult(u=float(sol.u[0]), fallback=False, sequence=sol.u.copy())
    except InfeasibleError:
        q_now = safe_control_set(state, p)
        u = float(qp_filter(np.array([0.0]), q_now)[0])
        return MpcResult(u=u, fallback=True, sequence=np.array([u]))
