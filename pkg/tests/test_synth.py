from collections import Counter

import numpy as np
import pytest

from deepglm.synth import (DESTINATION_PRIORS, DESTINATIONS, synth_bookings)


def test_minimum_size_enforced():
    with pytest.raises(ValueError):
        synth_bookings(50, seed=0)


def test_schema():
    users, sessions, labels = synth_bookings(200, seed=1)
    assert users.names == ["user_id", "age", "gender", "language",
                           "signup_device", "signup_browser"]
    assert sessions.names == ["user_id", "action_type", "device_type",
                              "duration"]
    assert len(labels) == 200
    assert set(labels) <= set(DESTINATIONS)


def test_class_priors_at_scale():
    n = 100000
    _, _, labels = synth_bookings(n, seed=2)
    counts = Counter(labels)
    total_pct = sum(DESTINATION_PRIORS.values())
    for dest, pct in DESTINATION_PRIORS.items():
        target = pct / total_pct
        se = np.sqrt(target * (1 - target) / n)
        assert abs(counts[dest] / n - target) < 4 * se + 1e-9, dest
    # headline checks at table scale
    assert abs(counts["NDF"] / n - 0.59) < 0.005
    assert abs(counts["US"] / n - 0.29) < 0.005


def test_age_missing_rate():
    users, _, _ = synth_bookings(100000, seed=3)
    assert abs(users.column("age").missing.mean() - 0.42) < 0.005


def test_ages_in_range():
    users, _, _ = synth_bookings(2000, seed=4)
    col = users.column("age")
    vals = col.values[~col.missing]
    assert vals.min() >= 18 and vals.max() <= 90


def test_every_user_has_a_session():
    users, sessions, _ = synth_bookings(500, seed=5)
    uids = {str(v) for v in users.column("user_id").values}
    session_uids = {str(v) for v in sessions.column("user_id").values}
    assert session_uids == uids


def test_determinism_byte_identical(tmp_path):
    from deepglm.tabular import write_csv
    for run in ("a", "b"):
        users, sessions, labels = synth_bookings(300, seed=6)
        write_csv(users, tmp_path / f"users_{run}.csv")
        write_csv(sessions, tmp_path / f"sessions_{run}.csv")
    assert (tmp_path / "users_a.csv").read_bytes() == \
        (tmp_path / "users_b.csv").read_bytes()
    assert (tmp_path / "sessions_a.csv").read_bytes() == \
        (tmp_path / "sessions_b.csv").read_bytes()


def test_booked_users_have_more_sessions():
    users, sessions, labels = synth_bookings(4000, seed=7)
    uid_counts = Counter(str(v) for v in sessions.column("user_id").values)
    uids = [str(v) for v in users.column("user_id").values]
    booked = [uid_counts[u] for u, lab in zip(uids, labels) if lab != "NDF"]
    ndf = [uid_counts[u] for u, lab in zip(uids, labels) if lab == "NDF"]
    assert np.mean(booked) > np.mean(ndf) + 2.0
