import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boolmf.errors import InstanceTooLargeError
from boolmf.model import L_MAX, Channel, Observation, Priors, posterior_log_score
from boolmf.oracle import exact_map, exact_marginals

from reference import brute_map_score, brute_marginals

# 1x1, K=1, o=1, c=0.9, uniform priors: the four assignment scores
S11 = 2 * math.log(0.5) + math.log(0.9)
S_OTHER = 2 * math.log(0.5) + math.log(0.1)


def one_by_one():
    return Observation((1, 1), [0], [0], [1])


def small_problem(seed, M=2, N=2, K=2):
    rng = np.random.default_rng(seed)
    O = rng.integers(0, 2, (M, N))
    O[rng.random((M, N)) < 0.3] = -1
    raw = rng.random((3, 2)) + 0.05
    return (Observation.from_dense(O), K,
            rng.uniform(0.1, 0.9, (M, K)), rng.uniform(0.1, 0.9, (K, N)),
            Channel(raw / raw.sum(axis=0)))


class TestExactMap:
    def test_one_by_one(self):
        X, Y, score, unique = exact_map(one_by_one(), 1, Priors(), Channel.symmetric(0.9))
        assert X[0, 0] == Y[0, 0] == 1
        assert score == pytest.approx(S11, abs=1e-12)
        assert score == pytest.approx(-1.49165, abs=1e-5)
        assert unique
        assert S_OTHER == pytest.approx(-3.68888, abs=1e-5)

    def test_empty_ties(self):
        *_, unique = exact_map(Observation((2, 2)), 1, Priors(), Channel.symmetric(0.9))
        assert not unique

    def test_hard_priors_dominate(self):
        obs = Observation.full(np.zeros((2, 2), dtype=np.uint8))
        X, Y, *_ = exact_map(obs, 2, Priors(1.0, 1.0), Channel.symmetric(0.9))
        assert X.all() and Y.all()

    def test_permutation_symmetry_is_unique(self):
        # rank-2 identity: the two components can swap, still one solution
        obs = Observation.full(np.eye(2, dtype=np.uint8))
        *_, unique = exact_map(obs, 2, Priors(), Channel.symmetric(0.9))
        assert unique

    def test_too_large(self):
        with pytest.raises(InstanceTooLargeError):
            exact_map(Observation((6, 7)), 2, Priors(), Channel.symmetric(0.9))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_matches_brute_force(self, seed):
        obs, K, px, py, ch = small_problem(seed)
        X, Y, score, _ = exact_map(obs, K, Priors(px, py), ch)
        assert score == pytest.approx(brute_map_score(obs, K, px, py, ch), abs=1e-9)
        assert posterior_log_score(X, Y, obs, Priors(px, py), ch) == pytest.approx(score, abs=1e-9)

    def test_dominates_random_samples(self):
        obs, K, px, py, ch = small_problem(7, M=3, N=3)
        pr = Priors(px, py)
        *_, best, _ = exact_map(obs, K, pr, ch)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            X, Y = rng.integers(0, 2, (3, K)), rng.integers(0, 2, (K, 3))
            assert posterior_log_score(X, Y, obs, pr, ch) <= best + 1e-9


class TestExactMarginals:
    def test_one_by_one(self):
        gx, gy = exact_marginals(one_by_one(), 1, Priors(), Channel.symmetric(0.9))
        expect = math.log((math.exp(S11) + math.exp(S_OTHER)) / (2 * math.exp(S_OTHER)))
        assert expect == pytest.approx(math.log(5.0), abs=1e-12)
        np.testing.assert_allclose(gx, [[expect]], atol=1e-12)
        np.testing.assert_allclose(gy, [[expect]], atol=1e-12)

    def test_no_evidence(self):
        gx, gy = exact_marginals(Observation((2, 2)), 2, Priors(), Channel.symmetric(0.9))
        np.testing.assert_allclose(gx, 0.0, atol=1e-12)
        np.testing.assert_allclose(gy, 0.0, atol=1e-12)

    def test_hard_prior(self):
        px = np.full((1, 1), 0.5)
        px[0, 0] = 1.0
        gx, _ = exact_marginals(one_by_one(), 1, Priors(px, 0.5), Channel.symmetric(0.9))
        assert gx[0, 0] == L_MAX

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_matches_brute_force(self, seed):
        obs, K, px, py, ch = small_problem(seed)
        gx, gy = exact_marginals(obs, K, Priors(px, py), ch)
        rx, ry = brute_marginals(obs, K, px, py, ch)
        np.testing.assert_allclose(gx, rx, atol=1e-9)
        np.testing.assert_allclose(gy, ry, atol=1e-9)

    def test_permutation_equivariant(self):
        obs, K, _, _, ch = small_problem(3, M=2, N=3, K=3)
        gx, gy = exact_marginals(obs, K, Priors(0.3, 0.6), ch)
        # column-uniform priors: every component is exchangeable
        for k in range(1, K):
            np.testing.assert_allclose(gx[:, k], gx[:, 0], atol=1e-9)
            np.testing.assert_allclose(gy[k], gy[0], atol=1e-9)
