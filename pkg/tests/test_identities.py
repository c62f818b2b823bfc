import numpy as np
import pytest

from deepglm.identities import IDENTITY_KINDS, verify_identity
from deepglm.linalg import ShapeError
from deepglm.rng import Rng


def close(lhs, rhs, rel=1e-10):
    return abs(lhs - rhs) <= rel * (1.0 + abs(lhs))


def test_product_worked_value():
    lhs, rhs = verify_identity("product", [2.0, 3.0])
    assert lhs == 6.0
    assert rhs == 0.25 * 25 - 0.25 * 1
    assert close(lhs, rhs)


def test_product_squared_worked_value():
    lhs, rhs = verify_identity("product_squared", [1.0, 1.0])
    assert lhs == 1.0
    assert close(lhs, rhs)


def test_max_sum_worked_value():
    lhs, rhs = verify_identity("max_sum", [1.0, -2.0, 3.0])
    assert lhs == 2.0 == rhs


def test_max_sum_matches_prefix_brute_force():
    rng = Rng(31)
    for _ in range(200):
        k = 1 + rng.below(10)
        x = rng.uniform01(k) * 10.0 - 5.0
        lhs, rhs = verify_identity("max_sum", x)
        brute = max(0.0, max(np.cumsum(x)))
        assert close(lhs, brute, 1e-12)
        assert close(lhs, rhs, 1e-12)


def test_max_handles_negative_sums():
    lhs, rhs = verify_identity("max", [-2.0, -3.0])
    assert lhs == -2.0
    assert close(lhs, rhs)


@pytest.mark.parametrize("kind", IDENTITY_KINDS)
def test_random_sweep(kind):
    rng = Rng(hash(kind) % (2 ** 31))
    for _ in range(10 ** 4):
        if kind == "max_sum":
            k = 1 + rng.below(10)
            x = rng.uniform01(k) * 10.0 - 5.0
        else:
            x = rng.uniform01(2) * 10.0 - 5.0
        lhs, rhs = verify_identity(kind, x)
        assert abs(lhs - rhs) <= 1e-9 * (1.0 + abs(lhs))


def test_wrong_arity_rejected():
    with pytest.raises(ShapeError):
        verify_identity("product", [1.0, 2.0, 3.0])
    with pytest.raises(ShapeError):
        verify_identity("max_sum", [])
