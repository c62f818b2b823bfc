import numpy as np

from deepglm.pipeline import (build_feature_matrix, frequency_ranking,
                              one_hot_labels, standardize,
                              train_booking_model)
from deepglm.synth import synth_bookings


def test_feature_matrix_shapes_and_names():
    users, sessions, _ = synth_bookings(300, seed=1)
    X, names = build_feature_matrix(users, sessions)
    assert X.shape == (300, len(names))
    assert "age" in names and "age_missing" in names
    assert any(n.startswith("gender=") for n in names)
    assert "gender_missing" in names
    assert "sessions.n_sessions" in names
    assert np.all(np.isfinite(X))


def test_standardize_train_statistics():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 4)) * 3 + 1
    train_rows = np.arange(40)
    Z = standardize(X, train_rows)
    assert np.abs(Z[train_rows].mean(axis=0)).max() < 1e-12
    assert np.abs(Z[train_rows].std(axis=0) - 1).max() < 1e-12


def test_one_hot_labels_columns():
    Y = one_hot_labels(["b", "a"], ["a", "b"])
    assert np.array_equal(Y, np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_frequency_ranking_order():
    labels = ["NDF"] * 5 + ["US"] * 3 + ["FR"] * 2 + ["DE"]
    top = frequency_ranking(labels, ["DE", "FR", "NDF", "US"], k=3)
    assert top == ["NDF", "US", "FR"]


def test_trained_model_beats_baselines():
    users, sessions, labels = synth_bookings(8000, seed=3)
    result = train_booking_model(users, sessions, labels, epochs=6, seed=4)
    assert result.holdout_ndcg > result.baseline_constant_ndcg
    assert result.holdout_ndcg > result.baseline_random_ndcg
    assert len(result.trace) == 6
    assert all(row["metric_name"] == "ndcg" for row in result.trace)
    # top-k accuracies nest
    assert result.topk[1]["overall"] <= result.topk[2]["overall"] \
        <= result.topk[3]["overall"]


def test_training_is_deterministic():
    users, sessions, labels = synth_bookings(1500, seed=5)
    a = train_booking_model(users, sessions, labels, epochs=2, seed=6)
    b = train_booking_model(users, sessions, labels, epochs=2, seed=6)
    assert a.holdout_ndcg == b.holdout_ndcg
    assert np.array_equal(a.net.get_params(), b.net.get_params())
