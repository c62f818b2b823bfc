"""Classical dimension-reduction learners, all two-layer at heart.

Conventions follow each method's standard formulation and are mixed on
purpose: PCA, the factor model, and the autoencoder store observations as
COLUMNS (matching nnet); PLS and SIR take the usual statistics orientation
with observations as ROWS.  Covariances use the 1/n convention everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nnet, optim
from .linalg import ShapeError, as_matrix, svd, sym_eig
from .nnet import LossSpec, Network, init_network
from .optim import ConditioningError, Schedule, TrainConfig


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------

@dataclass
class PcaModel:
    W: np.ndarray                 # p x K orthonormal loading columns
    center: np.ndarray            # p
    explained_variance: np.ndarray  # K, descending


def pca_fit(X, K: int) -> PcaModel:
    """Top-K principal directions of X (features x observations)."""
    X = as_matrix(X)
    p, n = X.shape
    if not 1 <= K <= min(p, n):
        raise ValueError(f"K must lie in [1, {min(p, n)}], got {K}")
    center = X.mean(axis=1)
    Xc = X - center[:, None]
    evals, V = sym_eig((Xc @ Xc.T) / n)
    return PcaModel(V[:, :K], center, np.maximum(evals[:K], 0.0))


def pca_transform(model: PcaModel, X) -> np.ndarray:
    X = as_matrix(X)
    return model.W.T @ (X - model.center[:, None])


def pca_reconstruct(model: PcaModel, Z) -> np.ndarray:
    return model.W @ as_matrix(Z) + model.center[:, None]


# ---------------------------------------------------------------------------
# PLS (NIPALS with deflation)
# ---------------------------------------------------------------------------

@dataclass
class PlsModel:
    scores: np.ndarray        # T, n x A (mutually orthogonal columns)
    loadings: np.ndarray      # P, p x A
    weights: np.ndarray       # w vectors used to build scores, p x A
    response_loadings: np.ndarray  # C, q x A
    inner: np.ndarray         # B, length-A inner regression coefficients
    x_mean: np.ndarray
    y_mean: np.ndarray
    n_components: int


def pls_fit(X, Y, n_components: int, max_iter: int = 500,
            tol: float = 1e-12) -> PlsModel:
    """NIPALS partial least squares: X = T P' + E, Y = T B C' + F.

    X is n x p and Y is n x q with observations as rows; both are centered
    internally.  Zero-variance predictor columns are rejected.
    """
    X = as_matrix(X).copy()
    y = np.asarray(Y, dtype=np.float64)
    Ymat = (y[:, None] if y.ndim == 1 else y).copy()
    n, p = X.shape
    if Ymat.shape[0] != n:
        raise ShapeError("X and Y must have the same number of rows")
    if not 0 <= n_components <= min(n, p):
        raise ValueError(f"n_components must lie in [0, {min(n, p)}]")
    if np.any(X.std(axis=0) == 0.0):
        raise ValueError("X contains a zero-variance column")

    x_mean = X.mean(axis=0)
    y_mean = Ymat.mean(axis=0)
    X -= x_mean
    Ymat -= y_mean
    q = Ymat.shape[1]

    T = np.zeros((n, n_components))
    P = np.zeros((p, n_components))
    Wmat = np.zeros((p, n_components))
    C = np.zeros((q, n_components))
    B = np.zeros(n_components)

    for a in range(n_components):
        u = Ymat[:, int(np.argmax(Ymat.var(axis=0)))]
        if np.allclose(u, 0.0):
            u = Ymat[:, 0]
        t_old = None
        for _ in range(max_iter):
            w = X.T @ u
            norm = np.linalg.norm(w)
            if norm == 0.0:
                raise ConditioningError("PLS weight vector collapsed to zero")
            w /= norm
            t = X @ w
            c = Ymat.T @ t / (t @ t)
            u = Ymat @ c / (c @ c)
            if t_old is not None and np.linalg.norm(t - t_old) <= tol * np.linalg.norm(t):
                break
            t_old = t
        p_vec = X.T @ t / (t @ t)
        b = (t @ u) / (t @ t)
        X -= np.outer(t, p_vec)
        Ymat -= b * np.outer(t, c)
        T[:, a] = t
        P[:, a] = p_vec
        Wmat[:, a] = w
        C[:, a] = c
        B[a] = b

    return PlsModel(T, P, Wmat, C, B, x_mean, y_mean, n_components)


def pls_predict(model: PlsModel, X) -> np.ndarray:
    """Predicted responses (n x q) for new rows X."""
    X = as_matrix(X) - model.x_mean
    X = X.copy()
    Yhat = np.tile(model.y_mean, (X.shape[0], 1))
    for a in range(model.n_components):
        t = X @ model.weights[:, a]
        Yhat += model.inner[a] * np.outer(t, model.response_loadings[:, a])
        X -= np.outer(t, model.loadings[:, a])
    return Yhat


# ---------------------------------------------------------------------------
# Sliced inverse regression
# ---------------------------------------------------------------------------

@dataclass
class SirModel:
    directions: np.ndarray   # p x k, orthonormal in the predictor-covariance metric
    eigenvalues: np.ndarray  # k, descending
    n_slices: int


def sir_fit(X, y, n_slices: int, k: int, ridge: float = 0.0) -> SirModel:
    """Directions whose projections best separate the slice means of X.

    X is n x p (rows = observations); y is sliced into n_slices groups by
    its quantiles (ties broken by a stable sort on index).  Returns the
    top-k generalized eigenvectors of the weighted between-slice covariance
    of slice means in the metric of the predictor covariance.
    """
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n, p = X.shape
    if len(y) != n:
        raise ShapeError("X and y must have the same number of rows")
    if n_slices < 2 or n < n_slices:
        raise ValueError("need 2 <= n_slices <= n")
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}]")

    Xc = X - X.mean(axis=0)
    sigma = (Xc.T @ Xc) / n + ridge * np.eye(p)

    evals, V = sym_eig(sigma)
    if evals[-1] <= 1e-12 * max(evals[0], 1.0):
        raise ConditioningError(
            "predictor covariance is singular; pass ridge > 0 to jitter it")
    inv_sqrt = V @ np.diag(evals ** -0.5) @ V.T

    order = np.argsort(y, kind="stable")
    base = n // n_slices
    extra = n % n_slices
    M = np.zeros((p, p))
    start = 0
    for h in range(n_slices):
        size = base + (1 if h < extra else 0)
        rows = order[start:start + size]
        start += size
        mean_h = Xc[rows].mean(axis=0)
        M += (size / n) * np.outer(mean_h, mean_h)

    whitened = inv_sqrt @ M @ inv_sqrt
    wvals, wvecs = sym_eig(whitened)
    directions = inv_sqrt @ wvecs[:, :k]
    return SirModel(directions, wvals[:k], n_slices)


# ---------------------------------------------------------------------------
# Factor model by alternating minimization
# ---------------------------------------------------------------------------

@dataclass
class FactorModel:
    weights: np.ndarray    # N x K
    factors: np.ndarray    # K x n_obs
    lam: float
    norm: int
    objective_trace: list = field(default_factory=list)
    status: str = "converged"


def _factor_objective(Z, W, F, lam, norm) -> float:
    fit = float(((Z - W @ F) ** 2).sum())
    if norm == 2:
        return fit + lam * float((W ** 2).sum())
    return fit + lam * float(np.abs(W).sum())


def _soft(x: float, thresh: float) -> float:
    if x > thresh:
        return x - thresh
    if x < -thresh:
        return x + thresh
    return 0.0


def factor_fit(Z, K: int, lam: float = 0.0, norm: int = 2,
               max_sweeps: int = 500, tol: float = 1e-8) -> FactorModel:
    """Alternating minimization of ||Z - W F||^2 + lam * phi(W).

    Z is N x n_obs (variables x observations), W is N x K, F is K x n_obs.
    norm selects the weight penalty: 2 for squared-l2 (ridge update), 1 for
    l1 (coordinate-descent soft thresholding).  Factors start from the
    truncated SVD of Z; the objective is non-increasing at every half-step.
    """
    Z = as_matrix(Z)
    N, n_obs = Z.shape
    if not 1 <= K < N:
        raise ValueError(f"K must lie in [1, {N - 1}]")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if norm not in (1, 2):
        raise ValueError("norm must be 1 or 2")

    U, S, V = svd(Z)
    F = (S[:K, None] * V[:, :K].T)
    W = U[:, :K].copy()

    trace = [_factor_objective(Z, W, F, lam, norm)]
    status = "max_sweeps"
    for _ in range(max_sweeps):
        # weights half-step
        G = F @ F.T
        if norm == 2:
            W = np.linalg.solve(G + lam * np.eye(K), F @ Z.T).T
        else:
            diag = np.diag(G).copy()
            for _inner in range(10):
                moved = 0.0
                for k in range(K):
                    if diag[k] == 0.0:
                        continue
                    # residual correlation with factor k, excluding itself
                    r = Z @ F[k] - W @ G[:, k] + W[:, k] * diag[k]
                    new = np.array([_soft(v, lam / 2.0) for v in r]) / diag[k]
                    moved = max(moved, float(np.abs(new - W[:, k]).max()))
                    W[:, k] = new
                if moved < 1e-12:
                    break
        trace.append(_factor_objective(Z, W, F, lam, norm))

        # factors half-step (unpenalized least squares)
        F = np.linalg.lstsq(W, Z, rcond=None)[0]
        trace.append(_factor_objective(Z, W, F, lam, norm))

        prev, last = trace[-3], trace[-1]
        if abs(prev - last) <= tol * max(1.0, abs(prev)):
            status = "converged"
            break
    return FactorModel(W, F, lam, norm, trace, status)


# ---------------------------------------------------------------------------
# Autoencoder (two-layer network trained by optim)
# ---------------------------------------------------------------------------

def autoencoder_fit(X, K: int, lam: float = 0.0, activation: str = "identity",
                    epochs: int = 3000, rate: float = 0.02, seed: int = 0,
                    method: str = "adam"):
    """Bottleneck reconstruction net: X -> act(W1 X + b1) -> W2 z + b2.

    X is p x n with observations as columns and K < p.  Returns
    (trained Network, report) where the report carries the plain
    reconstruction error and the encode/decode split objective
    ||X - W2 Z||^2 + lam * phi(Z) + ||Z - f(W1 X)||^2 evaluated at the
    trained encoding Z.
    """
    X = as_matrix(X)
    p, n = X.shape
    if not 1 <= K < p:
        raise ValueError(f"bottleneck K must lie in [1, {p - 1}]")
    net = init_network(p, [K, p], [activation, "identity"], seed=seed)
    config = TrainConfig(epochs=epochs, batch_size=n, seed=seed,
                         schedule=Schedule(a=rate))
    spec = LossSpec("l2", "l2" if lam > 0 else "none", lam)
    net, trace = optim.train(net, X, X, spec, config, method=method)

    Z = encode(net, X)
    recon = decode(net, Z)
    recon_err = float(((X - recon) ** 2).sum())
    # Encoder residual ||Z - f(W1 X)||^2 vanishes at Z = f(W1 X), so the
    # split objective reduces to decoder fit plus the encoding penalty.
    report = {
        "reconstruction_error": recon_err,
        "split_objective": recon_err + lam * float((Z ** 2).sum()),
        "objective_trace": [row["objective"] for row in trace],
    }
    return net, report


def encode(net: Network, X) -> np.ndarray:
    layer = net.layers[0]
    return nnet.activation_forward(layer.act,
                                   layer.W @ as_matrix(X) + layer.b[:, None])


def decode(net: Network, Z) -> np.ndarray:
    layer = net.layers[1]
    return layer.W @ as_matrix(Z) + layer.b[:, None]


def principal_angles_deg(A, B) -> np.ndarray:
    """Principal angles (degrees) between the column spaces of A and B."""
    Qa, _ = np.linalg.qr(as_matrix(A))
    Qb, _ = np.linalg.qr(as_matrix(B))
    s = np.clip(np.linalg.svd(Qa.T @ Qb, compute_uv=False), -1.0, 1.0)
    return np.degrees(np.arccos(s))
