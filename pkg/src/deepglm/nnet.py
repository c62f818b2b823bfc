"""Feed-forward networks as compositions of semi-affine layers.

A network is an ordered list of layers, each applying an elementwise
nonlinearity to W @ z + b.  Observations are stored as COLUMNS throughout
this module (an input batch is input_dim x n_obs); the tabular pipeline
keeps rows-as-records and transposes at the boundary.

The training objective is the penalized negative log-likelihood: an L2 or
cross-entropy data term plus an optional L1/L2 penalty over every weight
and bias.  backprop returns the exact reverse-mode gradient of that
objective.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import ShapeError, as_matrix
from .rng import Rng

ACTIVATIONS = ("identity", "relu", "tanh", "sigmoid", "softmax", "heaviside")


class GradientUnsupportedError(RuntimeError):
    """Raised when a gradient is requested through a non-differentiable layer."""


def activation_forward(tag: str, pre: np.ndarray) -> np.ndarray:
    """Apply the named activation elementwise (softmax: per column)."""
    if tag == "identity":
        return pre
    if tag == "relu":
        return np.maximum(pre, 0.0)
    if tag == "tanh":
        return np.tanh(pre)
    if tag == "sigmoid":
        return 1.0 / (1.0 + np.exp(-pre))
    if tag == "softmax":
        shifted = pre - pre.max(axis=0, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=0, keepdims=True)
    if tag == "heaviside":
        return (pre > 0.0).astype(np.float64)
    raise ValueError(f"unknown activation: {tag!r}")


def activation_backward(tag: str, pre: np.ndarray, post: np.ndarray,
                        grad_post: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. the activation output back to the pre-activation.

    ReLU uses subgradient 0 at exactly 0 so ties are never perturbed.
    """
    if tag == "identity":
        return grad_post
    if tag == "relu":
        return grad_post * (pre > 0.0)
    if tag == "tanh":
        return grad_post * (1.0 - post ** 2)
    if tag == "sigmoid":
        return grad_post * post * (1.0 - post)
    if tag == "softmax":
        # Jacobian of the per-column softmax: diag(a) - a a^T.
        inner = (grad_post * post).sum(axis=0, keepdims=True)
        return post * (grad_post - inner)
    if tag == "heaviside":
        raise GradientUnsupportedError("heaviside is forward-only")
    raise ValueError(f"unknown activation: {tag!r}")


@dataclass
class Layer:
    """One semi-affine layer: act(W @ z + b)."""
    W: np.ndarray
    b: np.ndarray
    act: str

    def __post_init__(self):
        self.W = as_matrix(self.W)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if self.W.shape[0] != self.b.shape[0]:
            raise ShapeError(
                f"bias length {self.b.shape[0]} != weight rows {self.W.shape[0]}")
        if self.act not in ACTIVATIONS:
            raise ValueError(f"unknown activation: {self.act!r}")


@dataclass
class Network:
    """Ordered stack of layers acting on input_dim-dimensional columns."""
    input_dim: int
    layers: list = field(default_factory=list)

    def __post_init__(self):
        dim = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.W.shape[1] != dim:
                raise ShapeError(
                    f"layer {i} expects input dim {layer.W.shape[1]}, chain gives {dim}")
            if layer.act == "softmax" and i != len(self.layers) - 1:
                raise ValueError("softmax is only legal as the final activation")
            dim = layer.W.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].W.shape[0] if self.layers else self.input_dim

    def num_params(self) -> int:
        return sum(l.W.size + l.b.size for l in self.layers)

    def get_params(self) -> np.ndarray:
        """Flatten all weights and biases into one vector (layer order)."""
        parts = []
        for l in self.layers:
            parts.append(l.W.ravel())
            parts.append(l.b)
        return np.concatenate(parts) if parts else np.zeros(0)

    def set_params(self, theta: np.ndarray) -> None:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != self.num_params():
            raise ShapeError(
                f"parameter vector has {theta.size} entries, need {self.num_params()}")
        pos = 0
        for l in self.layers:
            n = l.W.size
            l.W = theta[pos:pos + n].reshape(l.W.shape).copy()
            pos += n
            n = l.b.size
            l.b = theta[pos:pos + n].copy()
            pos += n

    def copy(self) -> "Network":
        return Network(self.input_dim,
                       [Layer(l.W.copy(), l.b.copy(), l.act) for l in self.layers])

    def to_json(self) -> str:
        doc = {
            "input_dim": self.input_dim,
            "layers": [
                {
                    "rows": l.W.shape[0],
                    "cols": l.W.shape[1],
                    "act": l.act,
                    "W": [float(x) for x in l.W.ravel()],
                    "b": [float(x) for x in l.b],
                }
                for l in self.layers
            ],
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "Network":
        doc = json.loads(text)
        layers = [
            Layer(np.array(d["W"], dtype=np.float64).reshape(d["rows"], d["cols"]),
                  np.array(d["b"], dtype=np.float64),
                  d["act"])
            for d in doc["layers"]
        ]
        return Network(doc["input_dim"], layers)


def init_network(input_dim: int, layer_sizes, activations=None,
                 seed: int = 0) -> Network:
    """Fresh network with N(0, 1/fan_in) weights and zero biases.

    activations defaults to relu everywhere when omitted.
    """
    if activations is None:
        activations = ["relu"] * len(layer_sizes)
    if len(layer_sizes) != len(activations):
        raise ShapeError("layer_sizes and activations must have equal length")
    rng = Rng(seed)
    layers = []
    fan_in = input_dim
    for size, act in zip(layer_sizes, activations):
        W = rng.std_normal(size * fan_in).reshape(size, fan_in) / np.sqrt(fan_in)
        layers.append(Layer(W, np.zeros(size), act))
        fan_in = size
    return Network(input_dim, layers)


@dataclass
class LossSpec:
    """Data loss kind plus weight penalty: kind in {l2, cross_entropy},
    penalty in {none, l2, l1} with coefficient lam >= 0."""
    kind: str = "l2"
    penalty: str = "none"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("l2", "cross_entropy"):
            raise ValueError(f"unknown loss kind: {self.kind!r}")
        if self.penalty not in ("none", "l2", "l1"):
            raise ValueError(f"unknown penalty: {self.penalty!r}")
        if self.lam < 0:
            raise ValueError("penalty coefficient must be nonnegative")


def forward(net: Network, X) -> tuple[np.ndarray, list]:
    """Run the batch X (input_dim x n) through the net.

    Returns (output, cache) where cache[l] = (pre, post) for each layer.
    """
    X = as_matrix(X)
    if X.shape[0] != net.input_dim:
        raise ShapeError(f"input has {X.shape[0]} rows, net expects {net.input_dim}")
    cache = []
    z = X
    for layer in net.layers:
        pre = layer.W @ z + layer.b[:, None]
        post = activation_forward(layer.act, pre)
        cache.append((pre, post))
        z = post
    return z, cache


def _check_one_hot(Y: np.ndarray) -> None:
    ok = np.all((Y == 0.0) | (Y == 1.0)) and np.allclose(Y.sum(axis=0), 1.0)
    if not ok:
        raise ValueError("cross_entropy requires one-hot label columns")


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=0, keepdims=True))


def penalty_value(net: Network, spec: LossSpec) -> float:
    if spec.penalty == "none" or spec.lam == 0.0:
        return 0.0
    total = 0.0
    for l in net.layers:
        if spec.penalty == "l2":
            total += float((l.W ** 2).sum() + (l.b ** 2).sum())
        else:
            total += float(np.abs(l.W).sum() + np.abs(l.b).sum())
    return spec.lam * total


def objective(net: Network, X, Y, spec: LossSpec) -> float:
    """Penalized loss: sum over observations of L(y_i, yhat_i) + lam * phi."""
    X = as_matrix(X)
    Y = as_matrix(Y)
    out, cache = forward(net, X)
    if Y.shape != out.shape:
        raise ShapeError(f"labels shape {Y.shape} != output shape {out.shape}")
    if spec.kind == "l2":
        loss = float(((Y - out) ** 2).sum())
    else:
        _check_one_hot(Y)
        if not net.layers or net.layers[-1].act != "softmax":
            raise ValueError("cross_entropy requires a softmax final layer")
        logits = cache[-1][0]
        loss = float(-(Y * _log_softmax(logits)).sum())
    return loss + penalty_value(net, spec)


def backprop(net: Network, X, Y, spec: LossSpec) -> list:
    """Exact gradients of objective(): a list of (dW, db) per layer."""
    X = as_matrix(X)
    Y = as_matrix(Y)
    for layer in net.layers:
        if layer.act == "heaviside":
            raise GradientUnsupportedError("heaviside is forward-only")
    out, cache = forward(net, X)
    if Y.shape != out.shape:
        raise ShapeError(f"labels shape {Y.shape} != output shape {out.shape}")

    if spec.kind == "cross_entropy":
        _check_one_hot(Y)
        if net.layers[-1].act != "softmax":
            raise ValueError("cross_entropy requires a softmax final layer")
        # Combined softmax + cross-entropy derivative: p - y at the logits.
        delta = cache[-1][1] - Y
    else:
        grad_out = 2.0 * (out - Y)
        pre, post = cache[-1]
        delta = activation_backward(net.layers[-1].act, pre, post, grad_out)

    grads = [None] * len(net.layers)
    for l in range(len(net.layers) - 1, -1, -1):
        inputs = X if l == 0 else cache[l - 1][1]
        dW = delta @ inputs.T
        db = delta.sum(axis=1)
        layer = net.layers[l]
        if spec.penalty == "l2" and spec.lam > 0:
            dW = dW + 2.0 * spec.lam * layer.W
            db = db + 2.0 * spec.lam * layer.b
        elif spec.penalty == "l1" and spec.lam > 0:
            dW = dW + spec.lam * np.sign(layer.W)
            db = db + spec.lam * np.sign(layer.b)
        grads[l] = (dW, db)
        if l > 0:
            grad_post = layer.W.T @ delta
            pre, post = cache[l - 1]
            delta = activation_backward(net.layers[l - 1].act, pre, post, grad_post)
    return grads


def flatten_grads(grads) -> np.ndarray:
    parts = []
    for dW, db in grads:
        parts.append(dW.ravel())
        parts.append(db)
    return np.concatenate(parts) if parts else np.zeros(0)


def grad_check(net: Network, X, Y, spec: LossSpec, step: float = 1e-6) -> float:
    """Max relative error between backprop and central finite differences.

    Relative error per parameter is |a - n| / max(1e-8, |a| + |n|); nets
    above 2000 parameters are rejected to bound the cost.
    """
    if net.num_params() > 2000:
        raise ValueError("grad_check limited to nets with <= 2000 parameters")
    analytic = flatten_grads(backprop(net, X, Y, spec))
    theta = net.get_params()
    probe = net.copy()
    worst = 0.0
    for i in range(theta.size):
        bumped = theta.copy()
        bumped[i] = theta[i] + step
        probe.set_params(bumped)
        hi = objective(probe, X, Y, spec)
        bumped[i] = theta[i] - step
        probe.set_params(bumped)
        lo = objective(probe, X, Y, spec)
        numeric = (hi - lo) / (2.0 * step)
        err = abs(analytic[i] - numeric) / max(1e-8, abs(analytic[i]) + abs(numeric))
        worst = max(worst, err)
    return worst
