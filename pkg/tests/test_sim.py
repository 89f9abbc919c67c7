import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twotype_gt.pooling import build_design, grid_design
from twotype_gt.sim import (NOISELESS, GroundTruth, NoiseModel, Observations, Priors, apply_noise,
                            plant_bernoulli, plant_fixed, pool_or, replication_rng, true_pool_states)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="module")
def small_design():
    return build_design(3, [0], [1], [2])


def three_sigma(p, n):
    return 3 * np.sqrt(p * (1 - p) / n)


def test_noise_model():
    m = NoiseModel.from_error_rates(false_positive=0.01, false_negative=0.03)
    assert m.sensitivity == pytest.approx(0.97) and m.specificity == pytest.approx(0.99)
    assert m.likelihood(1, 1) == pytest.approx(0.97)
    assert m.likelihood(0, 1) == pytest.approx(0.03)
    assert m.likelihood(1, 0) == pytest.approx(0.01)
    assert m.likelihood(0, 0) == pytest.approx(0.99)
    with pytest.raises(ValueError):
        NoiseModel(0.0, 0.9)
    with pytest.raises(ValueError):
        NoiseModel(1.2, 0.9)


def test_priors_joint():
    assert Priors(0.002, 0.002).joint()[0] == pytest.approx(0.996004)
    np.testing.assert_allclose(Priors(0.5, 0.5).joint(), 0.25)
    with pytest.raises(ValueError):
        Priors(-0.1, 0.2)


def test_plant_fixed(rng):
    t = plant_fixed(10, 0, 0, rng)
    assert not t.x_A.any() and not t.x_B.any()
    t = plant_fixed(10, 10, 10, rng)
    assert t.x_A.all() and t.x_B.all()
    t = plant_fixed(2401, 6, 6, rng)
    assert t.x_A.sum() == 6 and t.x_B.sum() == 6
    with pytest.raises(ValueError):
        plant_fixed(5, 6, 0, rng)


def test_plant_fixed_allows_overlap():
    hits = 0
    for rep in range(400):
        t = plant_fixed(4, 2, 2, replication_rng(3, rep))
        hits += bool((t.x_A & t.x_B).any())
    assert hits > 0


def test_plant_bernoulli(rng):
    assert not plant_bernoulli(50, Priors(0, 0), rng).x_A.any()
    t = plant_bernoulli(50, Priors(1, 1), rng)
    assert t.x_A.all() and t.x_B.all()
    n, p, draws = 2401, 0.002, 10_000
    counts = np.array([plant_bernoulli(n, Priors(p, p), rng).x_A.sum() for _ in range(draws)])
    mean, sd = n * p, np.sqrt(n * p * (1 - p))
    assert mean == pytest.approx(4.802)
    assert abs(counts.mean() - mean) < 3 * sd / np.sqrt(draws)


def test_true_pool_states(small_design):
    n = small_design.n_items
    z = true_pool_states(small_design, GroundTruth(np.zeros(n), np.zeros(n)))
    assert not any(v.any() for v in z)
    j = 17
    x = np.zeros(n, bool)
    x[j] = True
    z_A, z_B, z_AB = true_pool_states(small_design, GroundTruth(x, np.zeros(n, bool)))
    assert np.flatnonzero(z_A).tolist() == list(small_design.M_A.cols[j])
    assert not z_B.any()
    assert np.flatnonzero(z_AB).tolist() == list(small_design.M_AB.cols[j])
    assert z_A.sum() == 1   # column weight 1 with a single plane
    with pytest.raises(ValueError):
        true_pool_states(small_design, GroundTruth(np.zeros(3), np.zeros(3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pool_states_monotone_and_ab_is_or(seed):
    d = build_design(3, [0, 1], [1], [2])
    rng = np.random.default_rng(seed)
    n = d.n_items
    x_A, x_B = rng.random(n) < 0.05, rng.random(n) < 0.05
    z = true_pool_states(d, GroundTruth(x_A, x_B))
    x_A2 = x_A.copy()
    x_A2[rng.integers(n)] = True
    z2 = true_pool_states(d, GroundTruth(x_A2, x_B))
    for before, after in zip(z, z2):
        assert not (before & ~after).any()
    assert (z[2] == (pool_or(d.M_AB, x_A) | pool_or(d.M_AB, x_B))).all()


def test_noise_channel_rates(rng):
    z = np.ones(10, bool)
    assert (apply_noise(z, NOISELESS, rng) == z).all()
    n = 100_000
    fp = apply_noise(np.zeros(n, bool), NoiseModel(0.97, 0.99), rng).mean()
    assert abs(fp - 0.01) < three_sigma(0.01, n)
    fn = 1 - apply_noise(np.ones(n, bool), NoiseModel(0.97, 0.99), rng).mean()
    assert abs(fn - 0.03) < three_sigma(0.03, n)


def test_replication_streams_reproducible():
    a = replication_rng(7, 3).random(5)
    assert (a == replication_rng(7, 3).random(5)).all()
    assert not (a == replication_rng(7, 4).random(5)).all()


def test_observations_check():
    d = grid_design(1, q=3)
    obs = Observations(np.zeros(9), np.zeros(9), np.zeros(18))
    obs.check(d)
    with pytest.raises(ValueError):
        Observations(np.zeros(9), np.zeros(9), np.zeros(9)).check(d)
