"""Closed-form identities expressing products and maxima as semi-affine forms.

Each verifier returns (lhs, rhs): the direct evaluation and its re-expression
through affine combinations pushed through a scalar nonlinearity (squares,
fourth powers, absolute values, positive parts).  They agree to machine
precision, which is exactly what the test sweeps assert.
"""

from __future__ import annotations

import numpy as np

from .linalg import ShapeError, as_vector


def product_identity(x1: float, x2: float) -> tuple[float, float]:
    """x1*x2 against the quarter-square form (a+b)^2/4 - (a-b)^2/4."""
    lhs = x1 * x2
    rhs = 0.25 * (x1 + x2) ** 2 - 0.25 * (x1 - x2) ** 2
    return lhs, rhs


def max_identity(x1: float, x2: float) -> tuple[float, float]:
    """max(x1,x2) against (x1+x2)/2 + |x1-x2|/2.

    The half-sum term enters linearly, not in absolute value: with an
    absolute value on it the right side would fail whenever x1+x2 < 0.
    """
    lhs = max(x1, x2)
    rhs = 0.5 * (x1 + x2) + 0.5 * abs(x1 - x2)
    return lhs, rhs


def product_squared_identity(x1: float, x2: float) -> tuple[float, float]:
    """(x1*x2)^2 as a signed combination of four fourth powers."""
    lhs = (x1 * x2) ** 2
    rhs = (
        0.25 * (x1 + x2) ** 4
        + (7.0 / 108.0) * (x1 - x2) ** 4
        - (1.0 / 54.0) * (x1 + 2.0 * x2) ** 4
        - (8.0 / 27.0) * (x1 + 0.5 * x2) ** 4
    )
    return lhs, rhs


def max_sum_identity(x) -> tuple[float, float]:
    """Nested ReLU chain against the positive part of the max prefix sum.

    lhs composes f_b(z) = max(b + z, 0) over the entries of x applied to 0,
    innermost last; rhs is max_j (x_1 + ... + x_j) clipped at 0.
    """
    x = as_vector(x)
    if len(x) < 1:
        raise ShapeError("max_sum needs at least one entry")
    acc = 0.0
    for b in x[::-1]:
        acc = max(b + acc, 0.0)
    lhs = acc
    rhs = max(0.0, float(np.max(np.cumsum(x))))
    return lhs, rhs


def verify_identity(kind: str, x) -> tuple[float, float]:
    """Evaluate one identity; returns (lhs, rhs).

    kind is one of "product", "max", "product_squared" (x must have exactly
    two entries) or "max_sum" (one or more entries).
    """
    x = as_vector(x)
    if kind == "max_sum":
        return max_sum_identity(x)
    if len(x) != 2:
        raise ShapeError(f"{kind} identity needs exactly 2 entries, got {len(x)}")
    if kind == "product":
        return product_identity(x[0], x[1])
    if kind == "max":
        return max_identity(x[0], x[1])
    if kind == "product_squared":
        return product_squared_identity(x[0], x[1])
    raise ValueError(f"unknown identity kind: {kind!r}")


IDENTITY_KINDS = ("product", "max", "product_squared", "max_sum")
