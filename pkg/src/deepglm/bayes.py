"""Bayesian regularization: dropout, its ridge equivalence, and variational
inference with mean-field Gaussians.

Dropout masks layer INPUTS with i.i.d. Bernoulli(p) draws, where p is the
keep-probability.  Averaging the masked least-squares objective over the
mask distribution gives the closed form

    ||Y - p W X||^2 + p (1 - p) ||W Gamma||^2,

a ridge penalty in the metric Gamma_jj = sqrt(sum_i x_ji^2), i.e. shrinkage
proportional to each feature's energy.  gprior_ridge_solve minimizes that
closed form by its normal equations.

The variational side keeps a fully factorized Gaussian q = N(mu, diag(sigma^2))
and maximizes ELBO = E_q[log lik] - KL(q || prior), with the expectation
gradient estimated either by the score identity or by reparametrizing
theta = mu + sigma * eps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nnet, optim
from .linalg import ShapeError, as_matrix, as_vector
from .nnet import Network
from .optim import OptimizerState, Schedule
from .rng import Rng


def apply_dropout(X, p: float, rng: Rng) -> np.ndarray:
    """Elementwise product of X with a fresh Bernoulli(p) keep mask."""
    X = as_matrix(X)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"keep-probability must lie in [0, 1], got {p}")
    mask = rng.bernoulli(p, X.size).reshape(X.shape)
    return X * mask


def gprior_scale(X) -> np.ndarray:
    """Per-feature energies gamma_j = sqrt(sum over observations of x_ji^2).

    X holds features as rows and observations as columns.
    """
    X = as_matrix(X)
    return np.sqrt((X ** 2).sum(axis=1))


def dropout_marginal_objective(W, X, Y, p: float) -> float:
    """Closed form of E over masks of ||Y - W (D * X)||^2."""
    W, X, Y = as_matrix(W), as_matrix(X), as_matrix(Y)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"keep-probability must lie in [0, 1], got {p}")
    if W.shape[1] != X.shape[0] or Y.shape != (W.shape[0], X.shape[1]):
        raise ShapeError(
            f"shapes W{W.shape}, X{X.shape}, Y{Y.shape} are not conformable")
    gamma = gprior_scale(X)
    fit = float(((Y - p * (W @ X)) ** 2).sum())
    penalty = p * (1.0 - p) * float(((W * gamma[None, :]) ** 2).sum())
    return fit + penalty


def gprior_ridge_solve(X, Y, p: float) -> np.ndarray:
    """Minimizer of the marginalized dropout objective via normal equations.

    Solves [p^2 X X^T + p(1-p) Gamma^2] W^T = p X Y^T with a Cholesky
    factorization.  Y may be a vector (one output) or an out x n matrix;
    the returned W matches (vector or out x p matrix).
    """
    X = as_matrix(X)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"keep-probability must lie in (0, 1], got {p}")
    y = np.asarray(Y, dtype=np.float64)
    single = y.ndim == 1
    Ymat = y[None, :] if single else as_matrix(y)
    if Ymat.shape[1] != X.shape[1]:
        raise ShapeError(f"Y has {Ymat.shape[1]} observations, X has {X.shape[1]}")
    gamma2 = gprior_scale(X) ** 2
    A = p * p * (X @ X.T) + p * (1.0 - p) * np.diag(gamma2)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as err:
        raise optim.ConditioningError(
            "dropout ridge system is singular; features may be degenerate") from err
    rhs = p * (X @ Ymat.T)
    Wt = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    return Wt[:, 0] if single else Wt.T


def mc_dropout_predict(net: Network, keep_probs, X, S: int, rng: Rng):
    """Mean and unbiased variance of S stochastic dropout forward passes.

    keep_probs gives one keep-probability per layer (a scalar is broadcast);
    each pass masks every layer's input with a fresh Bernoulli draw.
    """
    X = as_matrix(X)
    if S < 2:
        raise ValueError("need at least S=2 samples for a variance estimate")
    if np.isscalar(keep_probs):
        keep_probs = [float(keep_probs)] * len(net.layers)
    if len(keep_probs) != len(net.layers):
        raise ShapeError("need one keep-probability per layer")
    # Welford accumulation: exact zeros when every pass agrees (p = 1).
    mean = None
    m2 = None
    for s in range(S):
        z = X
        for layer, p in zip(net.layers, keep_probs):
            z = apply_dropout(z, p, rng)
            z = nnet.activation_forward(layer.act, layer.W @ z + layer.b[:, None])
        if mean is None:
            mean = z.copy()
            m2 = np.zeros_like(z)
        else:
            delta = z - mean
            mean += delta / (s + 1)
            m2 += delta * (z - mean)
    return mean, m2 / (S - 1)


@dataclass
class VariationalGaussian:
    """Mean-field Gaussian q with parameters (mu, log_sigma)."""
    mu: np.ndarray
    log_sigma: np.ndarray

    def __post_init__(self):
        self.mu = as_vector(self.mu)
        self.log_sigma = as_vector(self.log_sigma)
        if self.mu.shape != self.log_sigma.shape:
            raise ShapeError("mu and log_sigma must have equal length")

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    def sample(self, rng: Rng) -> np.ndarray:
        return self.mu + self.sigma * rng.std_normal(len(self.mu))


def kl_gaussians(q: VariationalGaussian, prior: VariationalGaussian) -> float:
    """KL(q || prior) for diagonal Gaussians, summed over coordinates."""
    if len(q.mu) != len(prior.mu):
        raise ShapeError("q and prior must have equal length")
    s1, s2 = q.sigma, prior.sigma
    terms = (np.log(s2 / s1)
             + (s1 ** 2 + (q.mu - prior.mu) ** 2) / (2.0 * s2 ** 2)
             - 0.5)
    return float(terms.sum())


def kl_gaussians_grad(q: VariationalGaussian, prior: VariationalGaussian):
    """Gradient of kl_gaussians w.r.t. (mu, log_sigma) of q."""
    d_mu = (q.mu - prior.mu) / prior.sigma ** 2
    d_log_sigma = q.sigma ** 2 / prior.sigma ** 2 - 1.0
    return d_mu, d_log_sigma


def expectation_grad_samples(q: VariationalGaussian, f, grad_f, S: int,
                             rng: Rng, kind: str):
    """Per-sample MC estimates of E_q[f] and its gradient w.r.t. (mu, log_sigma).

    kind "score" uses f(theta) * grad log q(theta); kind "reparam"
    differentiates through theta = mu + sigma * eps (and needs grad_f).
    Returns (values, d_mu, d_log_sigma), each with one row per draw.
    """
    if kind not in ("score", "reparam"):
        raise ValueError(f"unknown estimator kind: {kind!r}")
    if S < 1:
        raise ValueError("need at least one Monte Carlo draw")
    dim = len(q.mu)
    sigma = q.sigma
    values = np.empty(S)
    d_mu = np.empty((S, dim))
    d_ls = np.empty((S, dim))
    for s in range(S):
        eps = rng.std_normal(dim)
        theta = q.mu + sigma * eps
        fv = float(f(theta))
        values[s] = fv
        if kind == "score":
            d_mu[s] = fv * eps / sigma
            d_ls[s] = fv * (eps ** 2 - 1.0)
        else:
            g = as_vector(grad_f(theta))
            d_mu[s] = g
            d_ls[s] = g * eps * sigma
    return values, d_mu, d_ls


def elbo(q: VariationalGaussian, model, S: int, rng: Rng, kind: str = "reparam"):
    """MC estimate of the evidence lower bound and its gradient.

    model must provide log_lik(theta), grad_log_lik(theta) and a prior
    attribute (a VariationalGaussian).  Returns (estimate, (d_mu,
    d_log_sigma)) where the gradient covers both the expectation term and
    the analytic KL term.
    """
    values, d_mu, d_ls = expectation_grad_samples(
        q, model.log_lik, model.grad_log_lik, S, rng, kind)
    if not np.all(np.isfinite(values)):
        raise ValueError("model log-likelihood returned a non-finite value")
    kl = kl_gaussians(q, model.prior)
    kl_dmu, kl_dls = kl_gaussians_grad(q, model.prior)
    estimate = float(values.mean()) - kl
    return estimate, (d_mu.mean(axis=0) - kl_dmu, d_ls.mean(axis=0) - kl_dls)


def vi_fit(model, q0: VariationalGaussian, steps: int, kind: str = "reparam",
           method: str = "adam", schedule: Schedule = None, S: int = 32,
           seed: int = 0):
    """Ascend the ELBO from q0; returns (fitted q, per-step ELBO trace)."""
    if schedule is None:
        schedule = Schedule(a=0.05)
    rng = Rng(seed)
    phi = np.concatenate([q0.mu, q0.log_sigma])
    dim = len(q0.mu)
    state = OptimizerState(method, phi.size)
    trace = []

    def neg_elbo_grad(p):
        q = VariationalGaussian(p[:dim], p[dim:])
        est, (gmu, gls) = elbo(q, model, S, rng, kind)
        trace.append(est)
        return -np.concatenate([gmu, gls])

    for k in range(steps):
        phi = optim.step(state, phi, neg_elbo_grad, k, schedule)
        if not np.all(np.isfinite(phi)):
            raise optim.DivergenceError("variational parameters diverged",
                                        iteration=k, trace=trace)
    return VariationalGaussian(phi[:dim], phi[dim:]), trace


class GaussianMeanModel:
    """Conjugate toy: theta ~ N(prior_mu, prior_sigma^2), y_i ~ N(theta, 1).

    Exposes the exact posterior, evidence and Gaussian-expected
    log-likelihood so tests can check the ELBO + KL = log evidence split.
    """

    def __init__(self, y, prior_mu: float = 0.0, prior_sigma: float = 1.0):
        self.y = as_vector(y)
        self.prior = VariationalGaussian(np.array([prior_mu]),
                                         np.array([np.log(prior_sigma)]))

    def log_lik(self, theta) -> float:
        t = float(np.asarray(theta).ravel()[0])
        n = len(self.y)
        return float(-0.5 * ((self.y - t) ** 2).sum() - 0.5 * n * np.log(2 * np.pi))

    def grad_log_lik(self, theta) -> np.ndarray:
        t = float(np.asarray(theta).ravel()[0])
        return np.array([(self.y - t).sum()])

    def exact_posterior(self) -> VariationalGaussian:
        n = len(self.y)
        pm = float(self.prior.mu[0])
        pv = float(self.prior.sigma[0] ** 2)
        post_var = 1.0 / (n + 1.0 / pv)
        post_mu = post_var * (self.y.sum() + pm / pv)
        return VariationalGaussian(np.array([post_mu]),
                                   np.array([0.5 * np.log(post_var)]))

    def log_evidence(self) -> float:
        # y ~ N(prior_mu * 1, I + prior_var * J) jointly.
        n = len(self.y)
        pm = float(self.prior.mu[0])
        pv = float(self.prior.sigma[0] ** 2)
        cov = np.eye(n) + pv * np.ones((n, n))
        resid = self.y - pm
        sign, logdet = np.linalg.slogdet(cov)
        quad = resid @ np.linalg.solve(cov, resid)
        return float(-0.5 * (n * np.log(2 * np.pi) + logdet + quad))

    def expected_log_lik(self, q: VariationalGaussian) -> float:
        """Analytic E_q[log p(y | theta)] for Gaussian q."""
        n = len(self.y)
        mu = float(q.mu[0])
        var = float(q.sigma[0] ** 2)
        return float(-0.5 * ((self.y - mu) ** 2).sum() - 0.5 * n * var
                     - 0.5 * n * np.log(2 * np.pi))

    def exact_elbo(self, q: VariationalGaussian) -> float:
        return self.expected_log_lik(q) - kl_gaussians(q, self.prior)


def ensemble_average(predictions, weights=None) -> np.ndarray:
    """Weighted average of K stacked prediction matrices.

    weights must be nonnegative and sum to 1 (within 1e-10); the default is
    uniform 1/K, the optimal choice for exchangeable predictors under any
    convex loss.
    """
    stack = [as_matrix(p) for p in predictions]
    K = len(stack)
    if K == 0:
        raise ValueError("need at least one prediction")
    shape = stack[0].shape
    if any(p.shape != shape for p in stack):
        raise ShapeError("all predictions must share one shape")
    if weights is None:
        weights = np.full(K, 1.0 / K)
    weights = as_vector(weights)
    if len(weights) != K:
        raise ShapeError("need one weight per predictor")
    if weights.min() < 0 or abs(weights.sum() - 1.0) > 1e-10:
        raise ValueError("weights must be nonnegative and sum to 1")
    out = np.zeros(shape)
    for w, p in zip(weights, stack):
        out += w * p
    return out
