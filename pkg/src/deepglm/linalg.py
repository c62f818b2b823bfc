"""Dense linear algebra helpers with deterministic conventions.

Matrices are plain float64 numpy arrays (row-major).  The decompositions
delegate to LAPACK through numpy and then impose fixed ordering and sign
conventions so that repeated runs and golden-file tests are stable:

* eigen/singular values are returned in descending order;
* the first nonzero entry of every eigenvector column is nonnegative;
* for the SVD the convention is applied to the columns of U, with V
  flipped in tandem so that U @ diag(S) @ V.T still reconstructs X exactly.
"""

from __future__ import annotations

import csv

import numpy as np


class ShapeError(ValueError):
    """Raised when an input has the wrong shape or violates symmetry."""


def as_matrix(a) -> np.ndarray:
    """Validate and return a as a finite float64 2-D array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def as_vector(a) -> np.ndarray:
    """Validate and return a as a finite float64 1-D array."""
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a 1-D array, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def _fix_column_signs(V: np.ndarray) -> np.ndarray:
    """Flip columns so the first entry of nonnegligible magnitude is >= 0."""
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if len(nz) and col[nz[0]] < 0:
            V[:, j] = -col
    return V


def sym_eig(A, tol: float = 1e-10):
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues descending, eigenvector columns).  Raises
    ShapeError if A is not square-symmetric within tol.
    """
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ShapeError(f"matrix must be square, got {A.shape}")
    scale = max(1.0, np.abs(A).max())
    if np.abs(A - A.T).max() > tol * scale:
        raise ShapeError("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(w)[::-1]
    return w[order], _fix_column_signs(V[:, order])


def svd(X):
    """Thin singular value decomposition X = U diag(S) V.T.

    S is nonnegative descending; U and V are column-orthonormal with the
    sign convention applied to U (V flipped in tandem).
    """
    X = as_matrix(X)
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    V = Vt.T
    for j in range(U.shape[1]):
        col = U[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if len(nz) and col[nz[0]] < 0:
            U[:, j] = -col
            V[:, j] = -V[:, j]
    return U, S, V


def save_matrix_csv(m, path) -> None:
    """Write a matrix as CSV, one row per line, '.' decimal separator."""
    m = as_matrix(m)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for row in m:
            writer.writerow([repr(float(x)) for x in row])


def load_matrix_csv(path) -> np.ndarray:
    """Read a matrix written by save_matrix_csv (value-exact round trip)."""
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if row:
                rows.append([float(x) for x in row])
    return as_matrix(np.array(rows, dtype=np.float64))
