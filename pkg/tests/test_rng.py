import numpy as np
import pytest

from deepglm.rng import Rng, prng_stream, split_seed


def test_same_seed_same_stream():
    a = prng_stream(Rng(42), "uniform01", 5)
    b = prng_stream(Rng(42), "uniform01", 5)
    assert np.array_equal(a, b)


def test_different_seeds_differ():
    a = Rng(1).uniform01(16)
    b = Rng(2).uniform01(16)
    assert not np.array_equal(a, b)


def test_uniform_range():
    u = Rng(3).uniform01(10000)
    assert u.min() >= 0.0 and u.max() < 1.0


def test_bernoulli_degenerate():
    assert prng_stream(Rng(0), "bernoulli", 100, p=1.0).min() == 1.0
    assert prng_stream(Rng(0), "bernoulli", 100, p=0.0).max() == 0.0


def test_bernoulli_bad_p():
    with pytest.raises(ValueError):
        Rng(0).bernoulli(1.5, 10)


def test_normal_moments_large_sample():
    n = 10 ** 6
    z = prng_stream(Rng(42), "std_normal", n)
    assert abs(z.mean()) < 4.0 / np.sqrt(n)
    assert abs(z.var() - 1.0) < 0.01


def test_normal_calls_are_stream_deterministic():
    a = Rng(9).std_normal(101)
    b = Rng(9).std_normal(101)
    assert np.array_equal(a, b)


def test_split_seed_independent_streams():
    parent = 42
    kids = [split_seed(parent, i) for i in range(8)]
    assert len(set(kids)) == 8
    a = Rng(kids[0]).uniform01(32)
    b = Rng(kids[1]).uniform01(32)
    assert not np.array_equal(a, b)


def test_permutation_is_a_permutation():
    p = Rng(4).permutation(50)
    assert sorted(p.tolist()) == list(range(50))


def test_categorical_matches_proportions():
    props = [0.6, 0.3, 0.1]
    draws = Rng(11).categorical(props, 50000)
    freq = np.bincount(draws, minlength=3) / 50000
    assert np.abs(freq - props).max() < 0.01


def test_poisson_mean():
    lam = 4.0
    k = Rng(8).poisson(lam, 20000)
    assert abs(k.mean() - lam) < 3 * np.sqrt(lam / 20000)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        prng_stream(Rng(0), "cauchy", 3)
