import numpy as np
import pytest

from deepglm.bayes import (GaussianMeanModel, VariationalGaussian,
                           apply_dropout, dropout_marginal_objective, elbo,
                           ensemble_average, expectation_grad_samples,
                           gprior_ridge_solve, gprior_scale, kl_gaussians,
                           mc_dropout_predict, vi_fit)
from deepglm.nnet import Layer, Network, init_network, forward
from deepglm.optim import Schedule
from deepglm.rng import Rng


class TestDropout:
    def test_keep_all(self):
        X = Rng(0).std_normal(20).reshape(4, 5)
        assert np.array_equal(apply_dropout(X, 1.0, Rng(1)), X)

    def test_drop_all(self):
        X = Rng(0).std_normal(20).reshape(4, 5)
        assert np.all(apply_dropout(X, 0.0, Rng(1)) == 0.0)

    def test_keep_fraction(self):
        X = np.ones((250, 400))  # 1e5 entries
        masked = apply_dropout(X, 0.3, Rng(7))
        assert abs(masked.mean() - 0.3) < 0.005

    def test_gamma_hand_value(self):
        X = np.array([[3.0, 4.0], [1.0, 0.0]])
        assert np.allclose(gprior_scale(X), [5.0, 1.0])

    def test_marginal_p1_is_least_squares(self):
        rng = Rng(3)
        W = rng.std_normal(6).reshape(2, 3)
        X = rng.std_normal(12).reshape(3, 4)
        Y = rng.std_normal(8).reshape(2, 4)
        assert np.isclose(dropout_marginal_objective(W, X, Y, 1.0),
                          ((Y - W @ X) ** 2).sum())

    @pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
    def test_marginal_matches_monte_carlo(self, p):
        rng = Rng(42)
        W = rng.std_normal(2 * 3).reshape(2, 3)
        X = rng.std_normal(3 * 8).reshape(3, 8)
        Y = rng.std_normal(2 * 8).reshape(2, 8)
        closed = dropout_marginal_objective(W, X, Y, p)
        mask_rng = Rng(100 + int(p * 10))
        draws = np.empty(10 ** 5)
        for s in range(10 ** 5):
            draws[s] = ((Y - W @ apply_dropout(X, p, mask_rng)) ** 2).sum()
        mc = draws.mean()
        assert abs(mc - closed) / closed < 0.005
        # and within 3 MC standard errors
        se = draws.std(ddof=1) / np.sqrt(len(draws))
        assert abs(mc - closed) < 3 * se


class TestGPriorRidge:
    def test_p1_is_ols(self):
        rng = Rng(5)
        X = rng.std_normal(3 * 30).reshape(3, 30)
        y = rng.std_normal(30)
        w = gprior_ridge_solve(X, y, 1.0)
        ols = np.linalg.solve(X @ X.T, X @ y)
        assert np.allclose(w, ols, atol=1e-10)

    def test_orthonormal_rows_cancel_scaling(self):
        # rows of X orthonormal: Gamma = I and w* = X y exactly
        X = np.vstack([np.eye(3), np.zeros((1, 3))]).T[:, :3]
        X = np.eye(3)
        y = np.array([1.0, -2.0, 0.5])
        for p in (0.2, 0.5, 0.9):
            assert np.allclose(gprior_ridge_solve(X, y, p), X @ y, atol=1e-12)

    def test_matches_sgd_minimizer(self):
        rng = Rng(9)
        X = rng.std_normal(3 * 20).reshape(3, 20)
        y = rng.std_normal(20)
        p = 0.6
        w_exact = gprior_ridge_solve(X, y, p)
        # iterative oracle: gradient descent on the closed-form objective
        gamma2 = gprior_scale(X) ** 2
        w = np.zeros(3)
        for _ in range(20000):
            grad = (-2 * p * X @ (y - p * (w @ X))
                    + 2 * p * (1 - p) * gamma2 * w)
            w -= 1e-3 * grad
        assert np.abs(w - w_exact).max() < 1e-4

    def test_stationarity(self):
        rng = Rng(11)
        X = rng.std_normal(4 * 25).reshape(4, 25)
        y = rng.std_normal(25)
        p = 0.37
        w = gprior_ridge_solve(X, y, p)
        gamma2 = gprior_scale(X) ** 2
        grad = -2 * p * X @ (y - p * (w @ X)) + 2 * p * (1 - p) * gamma2 * w
        assert np.linalg.norm(grad) < 1e-8


class TestMcDropout:
    def test_p1_zero_variance(self):
        net = init_network(3, [2], ["identity"], seed=1)
        X = Rng(2).std_normal(9).reshape(3, 3)
        mean, var = mc_dropout_predict(net, 1.0, X, S=16, rng=Rng(3))
        assert np.all(var == 0.0)
        assert np.allclose(mean, forward(net, X)[0])

    def test_linear_net_mean_is_p_scaled_forward(self):
        net = Network(3, [Layer(np.array([[1.0, -2.0, 0.5]]), np.array([0.3]),
                                "identity")])
        X = Rng(4).std_normal(3 * 5).reshape(3, 5)
        p = 0.5
        mean, var = mc_dropout_predict(net, p, X, S=10 ** 5, rng=Rng(5))
        expected = forward(net, p * X)[0]
        se = np.sqrt(var / 10 ** 5)
        assert np.all(np.abs(mean - expected) < 4 * se + 1e-12)

    def test_variance_nonnegative(self):
        net = init_network(4, [3, 2], ["relu", "identity"], seed=6)
        X = Rng(7).std_normal(4 * 6).reshape(4, 6)
        _, var = mc_dropout_predict(net, 0.7, X, S=50, rng=Rng(8))
        assert var.min() >= 0.0


class TestKL:
    def test_identical_is_zero(self):
        q = VariationalGaussian(np.array([0.3, -1.0]), np.array([0.1, 0.2]))
        assert kl_gaussians(q, q) == 0.0

    def test_unit_shift(self):
        q = VariationalGaussian(np.array([1.0]), np.array([0.0]))
        prior = VariationalGaussian(np.array([0.0]), np.array([0.0]))
        assert np.isclose(kl_gaussians(q, prior), 0.5)

    def test_nonnegative_sweep(self):
        rng = Rng(13)
        for _ in range(1000):
            q = VariationalGaussian(rng.std_normal(3), rng.std_normal(3) * 0.5)
            p = VariationalGaussian(rng.std_normal(3), rng.std_normal(3) * 0.5)
            assert kl_gaussians(q, p) >= 0.0


class TestElbo:
    def theta_squared_setup(self, mu):
        q = VariationalGaussian(np.array([mu]), np.array([0.0]))
        f = lambda th: float(th[0] ** 2)
        grad_f = lambda th: np.array([2.0 * th[0]])
        return q, f, grad_f

    @pytest.mark.parametrize("kind", ["score", "reparam"])
    def test_theta_squared_gradient(self, kind):
        # E_q[theta^2] = mu^2 + 1 for q = N(mu, 1), so d/dmu = 2 mu
        mu = 1.5
        q, f, grad_f = self.theta_squared_setup(mu)
        _, d_mu, _ = expectation_grad_samples(q, f, grad_f, 10 ** 4, Rng(17), kind)
        est = d_mu.mean()
        se = d_mu.std(ddof=1) / np.sqrt(len(d_mu))
        assert abs(est - 2 * mu) < 3 * se

    def test_estimators_agree_within_combined_se(self):
        mu = 1.5
        q, f, grad_f = self.theta_squared_setup(mu)
        _, d1, _ = expectation_grad_samples(q, f, grad_f, 10 ** 4, Rng(18), "score")
        _, d2, _ = expectation_grad_samples(q, f, grad_f, 10 ** 4, Rng(19), "reparam")
        se = np.sqrt(d1.var(ddof=1) / len(d1) + d2.var(ddof=1) / len(d2))
        assert abs(d1.mean() - d2.mean()) < 3 * se

    def test_reparam_variance_not_larger(self):
        q, f, grad_f = self.theta_squared_setup(1.5)
        _, d_s, _ = expectation_grad_samples(q, f, grad_f, 10 ** 4, Rng(20), "score")
        _, d_r, _ = expectation_grad_samples(q, f, grad_f, 10 ** 4, Rng(21), "reparam")
        assert d_r.var(ddof=1) <= d_s.var(ddof=1)

    def test_decomposition_and_jensen_on_conjugate_toy(self):
        rng = Rng(22)
        y = rng.std_normal(12) + 0.8
        model = GaussianMeanModel(y)
        evidence = model.log_evidence()
        posterior = model.exact_posterior()
        # log p(D) = ELBO(q) + KL(q || posterior), checked analytically
        for seed in range(20):
            r = Rng(seed)
            q = VariationalGaussian(r.std_normal(1), r.std_normal(1) * 0.3)
            lhs = model.exact_elbo(q) + kl_gaussians(q, posterior)
            assert abs(lhs - evidence) < 1e-6
            assert model.exact_elbo(q) <= evidence + 1e-12
        # at the exact posterior the bound is tight
        assert abs(model.exact_elbo(posterior) - evidence) < 1e-10

    def test_mc_elbo_tracks_exact(self):
        y = Rng(23).std_normal(10) + 0.5
        model = GaussianMeanModel(y)
        q = model.exact_posterior()
        est, _ = elbo(q, model, S=4000, rng=Rng(24), kind="reparam")
        assert abs(est - model.exact_elbo(q)) < 0.05


class TestViFit:
    def test_conjugate_recovery(self):
        y = Rng(25).std_normal(20) + 1.2
        model = GaussianMeanModel(y)
        q0 = VariationalGaussian(np.zeros(1), np.zeros(1))
        q, trace = vi_fit(model, q0, steps=1500, kind="reparam",
                          schedule=Schedule(a=0.05, decay=0.002), S=64, seed=26)
        posterior = model.exact_posterior()
        assert kl_gaussians(q, posterior) < 1e-3
        assert trace[-1] > trace[0]

    def test_zero_data_recovers_prior(self):
        model = GaussianMeanModel(np.zeros(0), prior_mu=0.4, prior_sigma=0.8)
        q0 = VariationalGaussian(np.array([2.0]), np.array([0.5]))
        q, _ = vi_fit(model, q0, steps=1500, kind="reparam",
                      schedule=Schedule(a=0.05, decay=0.002), S=16, seed=27)
        assert kl_gaussians(q, model.prior) < 1e-3


class TestEnsemble:
    def test_single_predictor_identity(self):
        P = Rng(28).std_normal(6).reshape(2, 3)
        assert np.array_equal(ensemble_average([P]), P)

    def test_identical_predictors(self):
        P = Rng(29).std_normal(6).reshape(2, 3)
        assert np.allclose(ensemble_average([P, P]), P)

    def test_weight_validation(self):
        P = np.zeros((1, 1))
        with pytest.raises(ValueError):
            ensemble_average([P, P], [0.6, 0.6])

    def test_jensen_l2_and_cross_entropy(self):
        rng = Rng(30)
        for _ in range(1000):
            K = 2 + rng.below(4)
            Y = rng.std_normal(6).reshape(2, 3)
            preds = [Y + rng.std_normal(6).reshape(2, 3) for _ in range(K)]
            avg = ensemble_average(preds)
            l2 = lambda P: ((Y - P) ** 2).sum()
            assert l2(avg) <= np.mean([l2(P) for P in preds]) + 1e-9

            # cross-entropy over probability columns
            labels = [rng.below(2) for _ in range(3)]
            Yh = np.zeros((2, 3))
            for i, c in enumerate(labels):
                Yh[c, i] = 1.0
            prob_preds = []
            for _ in range(K):
                raw = rng.uniform01(6).reshape(2, 3) + 1e-3
                prob_preds.append(raw / raw.sum(axis=0, keepdims=True))
            avg_p = ensemble_average(prob_preds)
            ce = lambda P: float(-(Yh * np.log(P)).sum())
            assert ce(avg_p) <= np.mean([ce(P) for P in prob_preds]) + 1e-9


def test_gprior_ridge_multi_output_matches_per_row():
    rng = Rng(33)
    X = rng.std_normal(4 * 30).reshape(4, 30)
    Y = rng.std_normal(3 * 30).reshape(3, 30)
    W = gprior_ridge_solve(X, Y, 0.7)
    assert W.shape == (3, 4)
    for o in range(3):
        w_row = gprior_ridge_solve(X, Y[o], 0.7)
        assert np.allclose(W[o], w_row, atol=1e-12)
