"""Minimal differentiable-computation core.

Matrices are plain float64 numpy arrays of shape (rows, cols), row-major.
Networks are small fixed-topology MLPs with hand-derived layer-wise
backpropagation; no taped autodiff. Everything is deterministic given a
seed, and training code treats parameters as values (updates return new
arrays).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "relu", "identity")


class ShapeError(ValueError):
    """Dimension mismatch, carrying the offending layer index."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message)
        self.layer = layer


def _act(name: str, x: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "identity":
        return x
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    """Derivative of the activation, given pre- and post-activation values."""
    if name == "tanh":
        return 1.0 - post * post
    if name == "relu":
        return (pre > 0.0).astype(np.float64)
    if name == "identity":
        return np.ones_like(pre)
    raise ValueError(f"unknown activation {name!r}")


@dataclass
class MlpNetwork:
    """Fully-connected network: weights[i] has shape (widths[i], widths[i+1])."""

    widths: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...] referencing the live arrays."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_parameters(self, params: list[np.ndarray]) -> None:
        if len(params) != 2 * self.n_layers:
            raise ShapeError(f"expected {2 * self.n_layers} parameter arrays, got {len(params)}")
        for i in range(self.n_layers):
            w, b = params[2 * i], params[2 * i + 1]
            if w.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ShapeError(f"parameter shape mismatch at layer {i}", layer=i)
            self.weights[i] = w
            self.biases[i] = b

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(
            widths=list(self.widths),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activations=list(self.activations),
        )


def mlp_init(
    widths: list[int],
    activations: list[str] | None = None,
    seed: int = 0,
    zero_last: bool = False,
) -> MlpNetwork:
    """Xavier-uniform initialized network; biases start at zero.

    zero_last zeroes the final layer's weights, useful for residual-style
    blocks that should start as the identity.
    """
    if len(widths) < 2:
        raise ShapeError("need at least an input and an output width")
    n = len(widths) - 1
    if activations is None:
        activations = ["tanh"] * (n - 1) + ["identity"]
    if len(activations) != n:
        raise ShapeError(f"expected {n} activations, got {len(activations)}")
    for a in activations:
        if a not in ACTIVATIONS:
            raise ValueError(f"unknown activation {a!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for i in range(n):
        fan_in, fan_out = widths[i], widths[i + 1]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        if zero_last and i == n - 1:
            w = np.zeros((fan_in, fan_out))
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return MlpNetwork(list(widths), weights, biases, list(activations))


def mlp_forward(net: MlpNetwork, x: np.ndarray) -> np.ndarray:
    """Forward pass; x has shape (batch, widths[0])."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != net.widths[0]:
        raise ShapeError(
            f"input has {x.shape[1]} columns, first layer expects {net.widths[0]}", layer=0
        )
    h = x
    for i, (w, b, a) in enumerate(zip(net.weights, net.biases, net.activations)):
        if h.shape[1] != w.shape[0]:
            raise ShapeError(f"layer {i}: input cols {h.shape[1]} != weight rows {w.shape[0]}", layer=i)
        h = _act(a, h @ w + b)
    return h


def mlp_forward_cached(net: MlpNetwork, x: np.ndarray):
    """Forward pass keeping per-layer pre/post activations for backprop."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != net.widths[0]:
        raise ShapeError(
            f"input has {x.shape[1]} columns, first layer expects {net.widths[0]}", layer=0
        )
    pres, posts = [], [x]
    h = x
    for w, b, a in zip(net.weights, net.biases, net.activations):
        pre = h @ w + b
        h = _act(a, pre)
        pres.append(pre)
        posts.append(h)
    return h, (pres, posts)


def mlp_backward(
    net: MlpNetwork,
    x: np.ndarray,
    upstream: np.ndarray,
    cache=None,
):
    """Analytic gradients of sum(upstream * output) w.r.t. params and input.

    Returns (param_grads, input_grad) where param_grads matches
    net.parameters() layout [dW0, db0, dW1, db1, ...].
    """
    if cache is None:
        _, cache = mlp_forward_cached(net, x)
    pres, posts = cache
    upstream = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if upstream.shape != posts[-1].shape:
        raise ShapeError(
            f"upstream grad shape {upstream.shape} != output shape {posts[-1].shape}",
            layer=net.n_layers - 1,
        )
    grads: list[np.ndarray] = [np.empty(0)] * (2 * net.n_layers)
    delta = upstream
    for i in range(net.n_layers - 1, -1, -1):
        delta = delta * _act_grad(net.activations[i], pres[i], posts[i + 1])
        grads[2 * i] = posts[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        delta = delta @ net.weights[i].T
    return grads, delta


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 64
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be > 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray]) -> "AdamState":
        return cls(
            step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    config: TrainConfig,
):
    """One Adam update with bias correction; returns (new_params, new_state)."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} params vs {len(grads)} grads")
    if state.step < 0:
        raise ValueError("state step counter must be >= 0")
    if not state.m:
        state = AdamState.for_params(params)
    t = state.step + 1
    b1, b2 = config.beta1, config.beta2
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"param shape {p.shape} != grad shape {g.shape}")
        m1 = b1 * m + (1 - b1) * g
        v1 = b2 * v + (1 - b2) * g * g
        m_hat = m1 / (1 - b1**t)
        v_hat = v1 / (1 - b2**t)
        new_params.append(p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon))
        new_m.append(m1)
        new_v.append(v1)
    return new_params, AdamState(step=t, m=new_m, v=new_v)


# Checkpoint format (version 1): a JSON object
#   {"format": "avlab-mlp", "version": 1,
#    "widths": [..], "activations": [..],
#    "params": ["0x1.91eb851eb851fp-3", ...]}
# where "params" is the flat parameter vector (weights row-major then bias,
# layer by layer) with each float64 rendered via float.hex() so the byte
# layout round-trips exactly and stays stable across releases.

CHECKPOINT_FORMAT = "avlab-mlp"
CHECKPOINT_VERSION = 1


def network_to_dict(net: MlpNetwork) -> dict:
    flat: list[str] = []
    for w, b in zip(net.weights, net.biases):
        flat.extend(float(v).hex() for v in w.ravel(order="C"))
        flat.extend(float(v).hex() for v in b)
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "widths": list(net.widths),
        "activations": list(net.activations),
        "params": flat,
    }


def network_from_dict(blob: dict) -> MlpNetwork:
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not an {CHECKPOINT_FORMAT} checkpoint")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob.get('version')}")
    widths = [int(w) for w in blob["widths"]]
    activations = [str(a) for a in blob["activations"]]
    values = [float.fromhex(s) for s in blob["params"]]
    weights, biases = [], []
    pos = 0
    for i in range(len(widths) - 1):
        n_w = widths[i] * widths[i + 1]
        weights.append(np.array(values[pos : pos + n_w]).reshape(widths[i], widths[i + 1]))
        pos += n_w
        biases.append(np.array(values[pos : pos + widths[i + 1]]))
        pos += widths[i + 1]
    if pos != len(values):
        raise ValueError("checkpoint parameter count does not match widths")
    net = MlpNetwork(widths, weights, biases, activations)
    for p in net.parameters():
        if not np.all(np.isfinite(p)):
            raise ValueError("checkpoint contains non-finite parameters")
    return net


def save_network(net: MlpNetwork, path: str) -> None:
    with open(path, "w") as f:
        json.dump(network_to_dict(net), f)


def load_network(path: str) -> MlpNetwork:
    with open(path) as f:
        return network_from_dict(json.load(f))
