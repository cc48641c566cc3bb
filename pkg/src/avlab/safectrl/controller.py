"""Neural ACC controllers with optional safety layers, trained by BPTT.

Layer kinds:
    none        raw (saturated) network output drives the plant
    qp-posthoc  trained exactly like `none`; the CBF-QP filter is applied
                only at evaluation time
    qp-diff     CBF-QP filter inside the training loop, differentiated at
                the active set
    gauge       network output squashed into the unit interval and gauge-
                mapped onto the safe set around its Chebyshev center

The plant is one-dimensional, so the filter and gauge reduce to closed
forms (interval clamp; center + radius * z) whose state derivatives are
written out explicitly for backprop through time.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..diffcalc import (
    AdamState,
    MlpNetwork,
    TrainConfig,
    adam_step,
    mlp_backward,
    mlp_forward_cached,
    mlp_init,
    network_from_dict,
    network_to_dict,
)
from ..sim2d.vehicle import AccState, step_acc
from .barrier import BarrierParams, barrier_value, safe_control_set
from .qp import qp_filter
from .gauge import gauge_map
from .polytope import chebyshev_center

LAYER_KINDS = ("none", "qp-posthoc", "qp-diff", "gauge")


class TrainingDivergedError(RuntimeError):
    def __init__(self, message: str, curve: list[float]):
        super().__init__(message)
        self.curve = curve


@dataclass(frozen=True)
class AccPlantConfig:
    v0: float = 16.0       # lead speed, m/s
    v_des: float = 24.0    # cruise target, m/s
    d_init: float = 50.0   # initial gap, m
    v_init: float = 13.89  # initial ego speed, m/s
    dt: float = 0.1


@dataclass
class ControllerTrainConfig:
    epochs: int = 600
    learning_rate: float = 2e-3
    rho_u: float = 0.01
    horizon: int = 200
    hidden: tuple[int, int] = (32, 32)
    seed: int = 0
    ic_batch: int = 8      # randomized initial conditions trained jointly
    ic_spread: float = 0.15  # relative spread of the initial conditions


OBS_SCALE = np.array([10.0, 10.0, 50.0])


@dataclass
class ControllerNet:
    kind: str
    net: MlpNetwork
    barrier: BarrierParams

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")


def _observe(v: np.ndarray, d: np.ndarray, v0: float) -> np.ndarray:
    obs = np.column_stack([v, v0 - v, d])
    return obs / OBS_SCALE


def _cbf_upper(v, d, v0: float, p: BarrierParams):
    """Upper acceleration bound from the barrier, elementwise."""
    h = d - p.tau_h * v
    return ((v0 - v) + p.alpha * h) / p.tau_h


def controller_output(ctrl: ControllerNet, state: AccState, filtered: bool):
    """(u_raw, u_safe) for one state; `filtered` applies the safety layer."""
    p = ctrl.barrier
    obs = _observe(np.array([state.v]), np.array([state.d]), state.v0)
    raw = float(mlp_forward_cached(ctrl.net, obs)[0][0, 0])
    if ctrl.kind == "gauge":
        z = math.tanh(raw)
        q = safe_control_set(state, p)
        c = chebyshev_center(q)
        u_safe = float(gauge_map(np.array([z]), q, c.center)[0])
        return z, u_safe
    u_ref = float(np.clip(raw, -p.u_max, p.u_max))
    if not filtered or ctrl.kind == "none":
        return u_ref, u_ref
    q = safe_control_set(state, p)
    return u_ref, float(qp_filter(np.array([u_ref]), q)[0])


def _episode_loss_and_grads(net: MlpNetwork, kind: str, plant: AccPlantConfig,
                            p: BarrierParams, cfg: ControllerTrainConfig,
                            v_init: np.ndarray, d_init: np.ndarray):
    """Forward rollout + BPTT over a batch of initial conditions."""
    dt = plant.dt
    h_steps = cfg.horizon
    nb = len(v_init)
    through_filter = kind in ("qp-diff", "gauge")

    v = v_init.copy()
    d = d_init.copy()
    # per-step records for the backward sweep
    rec_obs, rec_cache, rec_u = [], [], []
    rec_du_draw = np.zeros((h_steps, nb))
    rec_du_dv = np.zeros((h_steps, nb))
    rec_du_dd = np.zeros((h_steps, nb))
    vs = np.zeros((h_steps + 1, nb))
    vs[0] = v

    for t in range(h_steps):
        obs = _observe(v, d, plant.v0)
        raw_out, cache = mlp_forward_cached(net, obs)
        raw = raw_out[:, 0]

        ub_cbf = _cbf_upper(v, d, plant.v0, p)
        hi = np.minimum(ub_cbf, p.u_max)
        lo = np.full(nb, -p.u_max)
        cbf_binding = ub_cbf < p.u_max
        dhi_dv = np.where(cbf_binding, (-1.0 - p.alpha * p.tau_h) / p.tau_h, 0.0)
        dhi_dd = np.where(cbf_binding, p.alpha / p.tau_h, 0.0)

        if kind == "gauge":
            z = np.tanh(raw)
            c = (lo + hi) / 2.0
            rho = (hi - lo) / 2.0
            u = c + rho * z
            rec_du_draw[t] = rho * (1.0 - z * z)
            rec_du_dv[t] = (1.0 + z) / 2.0 * dhi_dv
            rec_du_dd[t] = (1.0 + z) / 2.0 * dhi_dd
        else:
            u_ref = np.clip(raw, -p.u_max, p.u_max)
            dref_draw = ((raw > -p.u_max) & (raw < p.u_max)).astype(float)
            if through_filter:
                u = np.clip(u_ref, lo, hi)
                inside = (u_ref > lo) & (u_ref < hi)
                clamped_hi = u_ref >= hi
                rec_du_draw[t] = np.where(inside, dref_draw, 0.0)
                rec_du_dv[t] = np.where(clamped_hi, dhi_dv, 0.0)
                rec_du_dd[t] = np.where(clamped_hi, dhi_dd, 0.0)
            else:
                u = u_ref
                rec_du_draw[t] = dref_draw

        rec_obs.append(obs)
        rec_cache.append(cache)
        rec_u.append(u)
        # exact integration of the double integrator over the step
        d = d + (plant.v0 - v) * dt - 0.5 * u * dt * dt
        v = v + u * dt
        vs[t + 1] = v

    err = vs[1:] - plant.v_des
    u_arr = np.stack(rec_u)
    loss = float(np.mean(np.sum(err**2, axis=0) + cfg.rho_u * np.sum(u_arr**2, axis=0)))
    if not np.isfinite(loss):
        raise TrainingDivergedError("episode loss is non-finite", curve=[])

    # backward sweep
    params = net.parameters()
    grads = [np.zeros_like(pm) for pm in params]
    gv = 2.0 * err[-1] / nb
    gd = np.zeros(nb)
    for t in range(h_steps - 1, -1, -1):
        gu = gv * dt - gd * 0.5 * dt * dt + 2.0 * cfg.rho_u * rec_u[t] / nb
        up = (gu * rec_du_draw[t])[:, None]
        step_grads, dobs = mlp_backward(net, rec_obs[t], up, cache=rec_cache[t])
        for i, g in enumerate(step_grads):
            grads[i] += g
        dv_net = dobs[:, 0] / OBS_SCALE[0] - dobs[:, 1] / OBS_SCALE[1]
        dd_net = dobs[:, 2] / OBS_SCALE[2]
        gv_prev = gv + gd * (-dt) + gu * rec_du_dv[t] + dv_net
        gd_prev = gd + gu * rec_du_dd[t] + dd_net
        if t >= 1:
            gv_prev = gv_prev + 2.0 * err[t - 1] / nb
        gv, gd = gv_prev, gd_prev
    return loss, grads


def train_controller(plant: AccPlantConfig, kind: str,
                     cfg: ControllerTrainConfig | None = None,
                     barrier: BarrierParams | None = None,
                     verbose: bool = False):
    """Train a controller of the given layer kind; returns (net, loss curve)."""
    if kind not in LAYER_KINDS:
        raise ValueError(f"unknown layer kind {kind!r}")
    cfg = cfg or ControllerTrainConfig()
    p = barrier or BarrierParams()
    rng = np.random.default_rng(cfg.seed)
    net = mlp_init([3, *cfg.hidden, 1], activations=["tanh", "tanh", "identity"],
                   seed=cfg.seed)
    params = net.parameters()
    opt = AdamState.for_params(params)
    tc = TrainConfig(learning_rate=cfg.learning_rate, epochs=cfg.epochs, seed=cfg.seed)

    nb = max(1, cfg.ic_batch)
    v_init = plant.v_init * (1.0 + cfg.ic_spread * rng.uniform(-1, 1, size=nb))
    d_init = plant.d_init * (1.0 + cfg.ic_spread * rng.uniform(-1, 1, size=nb))
    v_init[0], d_init[0] = plant.v_init, plant.d_init  # keep the nominal case

    curve: list[float] = []
    for epoch in range(cfg.epochs):
        net.set_parameters(params)
        try:
            loss, grads = _episode_loss_and_grads(net, kind, plant, p, cfg, v_init, d_init)
        except TrainingDivergedError as e:
            raise TrainingDivergedError(str(e), curve) from None
        curve.append(loss)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss diverged at epoch {len(curve)}", curve)
        # cosine decay stabilizes the late boundary-riding phase
        lr = cfg.learning_rate * 0.5 * (1.0 + math.cos(math.pi * epoch / max(cfg.epochs, 1)))
        step_cfg = TrainConfig(learning_rate=max(lr, 1e-5), epochs=1, seed=cfg.seed)
        params, opt = adam_step(params, grads, opt, step_cfg)
    net.set_parameters(params)
    if verbose and curve:
        print(f"[train-controller] kind={kind} first={curve[0]:.1f} last={curve[-1]:.1f}")
    return ControllerNet(kind=kind, net=net, barrier=p), curve


def run_closed_loop(ctrl: ControllerNet, plant: AccPlantConfig,
                    duration: float = 20.0) -> dict[str, np.ndarray]:
    """Closed-loop rollout recording t, v, D, u_raw, u_safe, h, solver_ms."""
    steps = int(round(duration / plant.dt))
    state = AccState(v=plant.v_init, v0=plant.v0, d=plant.d_init)
    filtered = ctrl.kind != "none"
    out = {k: np.zeros(steps) for k in ("t", "v", "d", "u_raw", "u_safe", "h", "solver_ms")}
    collided = False
    for t in range(steps):
        tic = time.perf_counter()
        u_raw, u_safe = controller_output(ctrl, state, filtered=filtered)
        ms = (time.perf_counter() - tic) * 1e3
        out["t"][t] = t * plant.dt
        out["v"][t] = state.v
        out["d"][t] = state.d
        out["u_raw"][t] = u_raw
        out["u_safe"][t] = u_safe
        out["h"][t] = barrier_value(state, ctrl.barrier)
        out["solver_ms"][t] = ms
        state = step_acc(state, u_safe, plant.dt)
        collided = collided or state.d <= 0.0
    out["collided"] = np.array([collided])
    return out


def controller_to_dict(ctrl: ControllerNet) -> dict:
    return {
        "format": "avlab-controller",
        "version": 1,
        "kind": ctrl.kind,
        "barrier": {"tau_h": ctrl.barrier.tau_h, "alpha": ctrl.barrier.alpha,
                    "u_max": ctrl.barrier.u_max},
        "net": network_to_dict(ctrl.net),
    }


def controller_from_dict(blob: dict) -> ControllerNet:
    if blob.get("format") != "avlab-controller":
        raise ValueError("not an avlab-controller checkpoint")
    bp = blob["barrier"]
    return ControllerNet(
        kind=blob["kind"],
        net=network_from_dict(blob["net"]),
        barrier=BarrierParams(tau_h=bp["tau_h"], alpha=bp["alpha"], u_max=bp["u_max"]),
    )
