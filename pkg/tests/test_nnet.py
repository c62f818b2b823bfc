import numpy as np
import pytest

from deepglm.linalg import ShapeError
from deepglm.nnet import (GradientUnsupportedError, Layer, LossSpec, Network,
                          activation_forward, backprop, flatten_grads,
                          forward, grad_check, init_network, objective)
from deepglm.rng import Rng


def one_hot_cols(labels, k):
    Y = np.zeros((k, len(labels)))
    for i, c in enumerate(labels):
        Y[c, i] = 1.0
    return Y


def test_zero_maps_to_zero_through_relu_and_tanh():
    z = np.zeros((3, 2))
    assert np.all(activation_forward("relu", z) == 0.0)
    assert np.all(activation_forward("tanh", z) == 0.0)


def test_identity_layer_is_identity():
    net = Network(3, [Layer(np.eye(3), np.zeros(3), "identity")])
    X = Rng(0).std_normal(12).reshape(3, 4)
    out, _ = forward(net, X)
    assert np.array_equal(out, X)


def test_relu_layer_hand_value():
    net = Network(2, [Layer(np.eye(2), np.array([-1.0, 0.0]), "relu")])
    out, _ = forward(net, np.array([[0.5], [2.0]]))
    assert np.allclose(out[:, 0], [0.0, 2.0])


def test_softmax_columns_normalized():
    net = init_network(26, [64, 64, 12], ["relu", "relu", "softmax"], seed=7)
    X = Rng(1).std_normal(26 * 40).reshape(26, 40)
    out, _ = forward(net, X)
    assert out.min() >= 0.0
    assert np.abs(out.sum(axis=0) - 1.0).max() < 1e-12


def test_forward_shape_error():
    net = init_network(4, [3], ["relu"], seed=0)
    with pytest.raises(ShapeError):
        forward(net, np.zeros((5, 2)))


def test_softmax_only_final():
    with pytest.raises(ValueError):
        Network(2, [Layer(np.eye(2), np.zeros(2), "softmax"),
                    Layer(np.eye(2), np.zeros(2), "identity")])


def test_objective_perfect_fit_is_zero():
    net = Network(2, [Layer(np.eye(2), np.zeros(2), "identity")])
    X = Rng(3).std_normal(8).reshape(2, 4)
    assert objective(net, X, X, LossSpec("l2")) == 0.0


def test_objective_lambda_zero_is_pure_loss():
    net = init_network(3, [2], ["tanh"], seed=1)
    X = Rng(4).std_normal(9).reshape(3, 3)
    Y = Rng(5).std_normal(6).reshape(2, 3)
    assert objective(net, X, Y, LossSpec("l2", "l2", 0.0)) == \
        objective(net, X, Y, LossSpec("l2"))


def test_objective_penalty_hand_value():
    # single weight w=2, bias 0, zero data: objective = 0 + 0.5 * (2^2) = 2
    net = Network(1, [Layer(np.array([[2.0]]), np.zeros(1), "identity")])
    X = np.zeros((1, 1))
    Y = np.zeros((1, 1))
    assert objective(net, X, Y, LossSpec("l2", "l2", 0.5)) == 2.0


def test_cross_entropy_rejects_non_one_hot():
    net = init_network(2, [3], ["softmax"], seed=2)
    X = np.zeros((2, 2))
    Y = np.full((3, 2), 0.5)
    with pytest.raises(ValueError):
        objective(net, X, Y, LossSpec("cross_entropy"))


def test_softmax_ce_logit_gradient():
    # logits (0,0), true class = first: gradient at logits is p - y = (-.5, .5)
    net = Network(2, [Layer(np.eye(2), np.zeros(2), "softmax")])
    X = np.zeros((2, 1))
    Y = one_hot_cols([0], 2)
    (dW, db), = backprop(net, X, Y, LossSpec("cross_entropy"))
    assert np.allclose(db, [-0.5, 0.5])


def test_zero_residual_gradients_vanish():
    net = Network(2, [Layer(np.eye(2), np.zeros(2), "identity")])
    X = Rng(6).std_normal(10).reshape(2, 5)
    grads = flatten_grads(backprop(net, X, X, LossSpec("l2")))
    assert np.abs(grads).max() == 0.0


def test_heaviside_rejected_in_backprop():
    net = Network(2, [Layer(np.eye(2), np.zeros(2), "heaviside")])
    X = np.zeros((2, 1))
    with pytest.raises(GradientUnsupportedError):
        backprop(net, X, X, LossSpec("l2"))


def test_grad_check_linear_regression():
    net = init_network(4, [1], ["identity"], seed=3)
    X = Rng(7).std_normal(4 * 20).reshape(4, 20)
    w_true = np.array([[1.0, -2.0, 0.5, 3.0]])
    Y = w_true @ X + 0.1
    # independent oracle: gradient of sum-of-squares is 2 X (Xᵀw − y) rowwise
    resid = net.layers[0].W @ X + net.layers[0].b[:, None] - Y
    oracle_dW = 2.0 * resid @ X.T
    (dW, db), = backprop(net, X, Y, LossSpec("l2"))
    assert np.allclose(dW, oracle_dW, rtol=1e-12)
    assert grad_check(net, X, Y, LossSpec("l2")) < 1e-7


def test_grad_check_tanh_softmax_architecture():
    net = init_network(2, [2, 2, 2], ["tanh", "tanh", "softmax"], seed=11)
    X = Rng(8).std_normal(2 * 12).reshape(2, 12)
    Y = one_hot_cols([i % 2 for i in range(12)], 2)
    assert grad_check(net, X, Y, LossSpec("cross_entropy")) < 1e-5


def test_grad_check_deep_relu_with_penalties():
    rng = Rng(9)
    X = rng.std_normal(3 * 10).reshape(3, 10)
    Y = rng.std_normal(2 * 10).reshape(2, 10)
    for penalty, lam in [("none", 0.0), ("l2", 0.1), ("l1", 0.05)]:
        net = init_network(3, [6, 5, 2], ["relu", "relu", "identity"], seed=13)
        assert grad_check(net, X, Y, LossSpec("l2", penalty, lam)) < 1e-5


def test_grad_check_param_limit():
    net = init_network(100, [30], ["relu"], seed=0)
    with pytest.raises(ValueError):
        grad_check(net, np.zeros((100, 1)), np.zeros((30, 1)), LossSpec("l2"))


def test_forward_determinism():
    net = init_network(5, [4, 3], ["tanh", "identity"], seed=21)
    X = Rng(10).std_normal(5 * 6).reshape(5, 6)
    a, _ = forward(net, X)
    b, _ = forward(net, X)
    assert np.array_equal(a, b)


def test_json_round_trip_exact():
    net = init_network(4, [3, 2], ["relu", "softmax"], seed=17)
    again = Network.from_json(net.to_json())
    assert again.input_dim == net.input_dim
    for l1, l2 in zip(net.layers, again.layers):
        assert np.array_equal(l1.W, l2.W)
        assert np.array_equal(l1.b, l2.b)
        assert l1.act == l2.act


def test_heaviside_forward_only_binary_output():
    net = Network(2, [Layer(np.array([[1.0, -1.0]]), np.array([0.0]),
                            "heaviside")])
    X = np.array([[2.0, 0.0, -1.0], [0.5, 0.0, 3.0]])
    out, _ = forward(net, X)
    assert out.tolist() == [[1.0, 0.0, 0.0]]  # H(0) = 0 by convention


def test_init_network_defaults_to_relu():
    net = init_network(3, [4, 2], seed=1)
    assert [l.act for l in net.layers] == ["relu", "relu"]
