"""First- and second-order optimizers plus the mini-batch training loop.

All methods act on a flat parameter vector and a gradient callback.  The
adaptive methods keep a squared-gradient accumulator c and divide by
sqrt(c) + eps; eps is added rather than subtracted so the denominator can
never vanish.  Velocity-based methods use the displacement convention
(params <- params + v with v accumulating negative gradient steps), and
Nesterov evaluates the gradient at the look-ahead point params + mu * v.

Mini-batches are consecutive cyclic index blocks, so averaging the batch
gradient over one full cycle reproduces the full-data gradient exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nnet
from .nnet import LossSpec, Network

METHODS = ("sgd", "momentum", "nesterov", "adagrad", "rmsprop", "adam")


class DivergenceError(RuntimeError):
    """Raised when an objective or gradient stops being finite."""

    def __init__(self, message, iteration=None, trace=None, checkpoint=None):
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace
        self.checkpoint = checkpoint


class ConditioningError(RuntimeError):
    """Raised when a linear system is too ill-conditioned to solve."""


@dataclass
class Schedule:
    """Exponentially decaying step size t_k = a * exp(-decay * k)."""
    a: float = 0.01
    decay: float = 0.0

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("initial rate must be positive")
        if self.decay < 0:
            raise ValueError("decay must be nonnegative")

    def rate(self, k: int) -> float:
        return self.a * np.exp(-self.decay * k)


@dataclass
class OptimizerState:
    """Per-method auxiliary state over a flat parameter vector.

    v is the velocity, c the squared-gradient accumulator; mu and d are the
    momentum and accumulator decay factors, eps guards the adaptive
    denominator.
    """
    method: str
    dim: int
    mu: float = 0.9
    d: float = 0.9
    eps: float = 1e-8
    v: np.ndarray = field(default=None)
    c: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method: {self.method!r}")
        if not 0.0 <= self.mu < 1.0:
            raise ValueError("mu must lie in [0, 1)")
        if not 0.0 <= self.d < 1.0:
            raise ValueError("d must lie in [0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.v is None:
            self.v = np.zeros(self.dim)
        if self.c is None:
            self.c = np.zeros(self.dim)


def minibatch_indices(T: int, batch_size: int, k: int) -> np.ndarray:
    """Indices of the k-th consecutive cyclic block (0-based, wraps mod T)."""
    if not 1 <= batch_size <= T:
        raise ValueError(f"batch_size must lie in [1, {T}], got {batch_size}")
    start = (k * batch_size) % T
    return (start + np.arange(batch_size)) % T


def step(state: OptimizerState, params: np.ndarray, grad_fn, k: int,
         schedule: Schedule) -> np.ndarray:
    """One update of the chosen method; mutates state, returns new params.

    grad_fn maps a parameter vector to the gradient there (only Nesterov
    evaluates it anywhere other than the current params).
    """
    t = schedule.rate(k)
    if state.method == "nesterov":
        g = grad_fn(params + state.mu * state.v)
    else:
        g = grad_fn(params)
    g = np.asarray(g, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise DivergenceError("non-finite gradient", iteration=k)

    m = state.method
    if m == "sgd":
        return params - t * g
    if m == "momentum":
        state.v = state.mu * state.v - t * g
        return params + state.v
    if m == "nesterov":
        state.v = state.mu * state.v - t * g
        return params + state.v
    if m == "adagrad":
        state.c = state.c + g ** 2
        return params - t * g / (np.sqrt(state.c) + state.eps)
    if m == "rmsprop":
        state.c = state.d * state.c + (1.0 - state.d) * g ** 2
        return params - t * g / (np.sqrt(state.c) + state.eps)
    if m == "adam":
        state.v = state.mu * state.v + (1.0 - state.mu) * g
        state.c = state.d * state.c + (1.0 - state.d) * g ** 2
        return params - t * state.v / (np.sqrt(state.c) + state.eps)
    raise ValueError(f"unknown method: {m!r}")


def _finite_diff_hessian(grad_fn, params: np.ndarray, step_size: float) -> np.ndarray:
    n = params.size
    H = np.empty((n, n))
    for i in range(n):
        bump = np.zeros(n)
        bump[i] = step_size
        H[:, i] = (grad_fn(params + bump) - grad_fn(params - bump)) / (2 * step_size)
    return 0.5 * (H + H.T)


def newton_step(grad_fn, params: np.ndarray, damping: float = 0.0,
                fd_step: float = 1e-5, max_escalations: int = 12) -> np.ndarray:
    """Damped Newton update: solve (H + damping*I) delta = -g.

    H comes from central finite differences of the analytic gradient.  If
    the damped Hessian is not positive definite the damping is escalated
    (x10, starting from 1e-8 when zero); after max_escalations a
    ConditioningError is raised.  Limited to <= 500 parameters.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.size > 500:
        raise ValueError("newton_step limited to <= 500 parameters")
    g = np.asarray(grad_fn(params), dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise DivergenceError("non-finite gradient in newton_step")
    H = _finite_diff_hessian(grad_fn, params, fd_step)
    lam = damping
    for _ in range(max_escalations):
        try:
            L = np.linalg.cholesky(H + lam * np.eye(params.size))
        except np.linalg.LinAlgError:
            lam = max(lam * 10.0, 1e-8)
            continue
        y = np.linalg.solve(L, -g)
        delta = np.linalg.solve(L.T, y)
        return params + delta
    raise ConditioningError(
        f"damped Hessian not positive definite up to damping {lam:g}")


def newton_minimize(f, grad_fn, params: np.ndarray, damping: float = 1e-3,
                    max_steps: int = 100, tol: float = 1e-10):
    """Adaptive damped Newton iteration (accept/shrink on decrease, grow on
    increase).  Returns (params, trace of f values)."""
    params = np.asarray(params, dtype=np.float64)
    lam = damping
    trace = [float(f(params))]
    for _ in range(max_steps):
        try:
            candidate = newton_step(grad_fn, params, lam)
        except ConditioningError:
            lam *= 10.0
            continue
        f_new = float(f(candidate))
        if f_new <= trace[-1]:
            params = candidate
            trace.append(f_new)
            lam = max(lam * 0.3, 1e-12)
            if len(trace) > 1 and abs(trace[-2] - trace[-1]) < tol:
                break
        else:
            lam = max(lam * 10.0, 1e-8)
    return params, trace


@dataclass
class TrainConfig:
    """Epoch/batch schedule for the mini-batch loop."""
    epochs: int = 20
    batch_size: int = 256
    seed: int = 0
    schedule: Schedule = field(default_factory=Schedule)
    eval_hook_period: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_hook_period < 1:
            raise ValueError("eval_hook_period must be >= 1")


def train(net: Network, X, Y, spec: LossSpec, config: TrainConfig,
          method: str = "sgd", mu: float = 0.9, d: float = 0.9,
          eps: float = 1e-8, eval_fn=None):
    """Mini-batch training of net on columns of X against labels Y.

    Minimizes the mean-per-observation penalized objective: each step uses
    the batch-mean data gradient plus the penalty gradient scaled by 1/T,
    which keeps the batch estimator unbiased for the full gradient.

    eval_fn, when given, is called as eval_fn(net) every eval_hook_period
    epochs and must return (metric_name, metric_value).  Returns
    (trained net, trace) where trace rows are dicts with keys epoch,
    objective, metric_name, metric_value.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    T = X.shape[1]
    if T == 0:
        raise ValueError("training data is empty")
    if config.batch_size > T:
        raise ValueError(f"batch_size {config.batch_size} exceeds data size {T}")

    net = net.copy()
    params = net.get_params()
    state = OptimizerState(method, params.size, mu=mu, d=d, eps=eps)
    batches_per_epoch = (T + config.batch_size - 1) // config.batch_size
    trace = []
    k = 0
    last_good = params.copy()

    def batch_grad(theta, idx):
        net.set_params(theta)
        # Scale the penalty so the batch gradient estimates the gradient of
        # (1/T) * [sum-loss + lam * phi].
        bspec = LossSpec(spec.kind, spec.penalty, spec.lam * len(idx) / T)
        g = nnet.flatten_grads(nnet.backprop(net, X[:, idx], Y[:, idx], bspec))
        return g / len(idx)

    for epoch in range(config.epochs):
        for _ in range(batches_per_epoch):
            idx = minibatch_indices(T, config.batch_size, k)
            try:
                params = step(state, params,
                              lambda th: batch_grad(th, idx), k, config.schedule)
            except DivergenceError as err:
                err.trace = trace
                err.checkpoint = last_good
                raise
            k += 1
        net.set_params(params)
        obj = nnet.objective(net, X, Y, spec) / T
        if not np.isfinite(obj):
            raise DivergenceError(f"objective diverged at epoch {epoch}",
                                  iteration=k, trace=trace, checkpoint=last_good)
        last_good = params.copy()
        row = {"epoch": epoch + 1, "objective": obj,
               "metric_name": "", "metric_value": ""}
        if eval_fn is not None and (epoch + 1) % config.eval_hook_period == 0:
            name, value = eval_fn(net)
            row["metric_name"] = name
            row["metric_value"] = value
        trace.append(row)
    net.set_params(params)
    return net, trace
