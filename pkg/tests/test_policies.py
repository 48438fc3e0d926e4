from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiresim.estimator import GroupPosterior, RadiusParams, conf_radius
from hiresim.model import Candidate
from hiresim.policies import (
    Pool, PolicyKind, StepParams, choose_hybrid, choose_lf, choose_ucb, hire_from_finalists,
    hybrid_index, policy_step, select_finalists, top_k, top_k_each_group,
)

R0 = RadiusParams(2.0, 1.0, 0.1, 1.0)


class FixedPosterior(GroupPosterior):
    """Posterior with a hand-set estimate and Gram matrix."""

    def __init__(self, theta_hat, V):
        super().__init__(len(theta_hat), 1.0)
        self.theta_hat = np.asarray(theta_hat, float)
        self.V_bar = np.asarray(V, float)
        self.V_inv = np.linalg.inv(self.V_bar)
        self.logdet = float(np.linalg.slogdet(self.V_bar)[1])


def pool_1d(values, groups):
    return Pool(np.asarray(values, float)[:, None], np.asarray(groups))


def flat_posts(G=2):
    return [FixedPosterior([1.0], [[1.0]]) for _ in range(G)]


def test_lf_examples():
    assert choose_lf(pool_1d([0.5, 0.2], [0, 0]), flat_posts()).chosen == 0
    assert choose_lf(pool_1d([0.3, 0.3], [0, 1]), flat_posts()).chosen == 0
    assert choose_lf(pool_1d([1.0, 2.0], [0, 1]), [GroupPosterior(1, 1.0)] * 2).chosen == 0


def test_ucb_prefers_less_observed_group():
    posts = [FixedPosterior([1.0], [[50.0]]), FixedPosterior([1.0], [[2.0]])]
    d = choose_ucb(pool_1d([1.0, 1.0], [0, 1]), posts, R0)
    assert d.q_hat[0] == d.q_hat[1]
    assert d.width[1] / d.width[0] * conf_radius(posts[0], R0) / conf_radius(posts[1], R0) == pytest.approx(5.0)
    assert d.index_used[1] > d.index_used[0] and d.chosen == 1


def test_ucb_zero_width_equals_lf():
    posts = flat_posts()
    pool = pool_1d([0.0, 0.0, 0.0], [0, 1, 1])
    assert choose_ucb(pool, posts, R0).chosen == choose_lf(pool, posts).chosen == 0
    assert choose_ucb(pool_1d([7.0], [1]), posts, R0).chosen == 0


def test_hybrid_index_examples():
    c = Candidate(0, np.array([1.0]), 0.0, 0.0, 0.0)

    class W(FixedPosterior):
        def __init__(self, theta, width):
            super().__init__([theta], [[1.0]])
            self._w = width

        def weighted_norm(self, x):
            return self._w

    r = RadiusParams(0.0, 1.0, 0.5, 1.0)  # radius exactly 1 for a fresh det
    p = W(1.0, 0.5)
    p.logdet = 0.0
    assert hybrid_index(c, p, r, 1.0, 2.0) == (1.0, False)
    p = W(1.0, 3.0)
    p.logdet = 0.0
    assert hybrid_index(c, p, r, 1.0, 2.0) == (4.0, True)
    p = W(0.0, 0.1)
    p.logdet = 0.0
    assert hybrid_index(c, p, r, 1.0, 2.0) == (pytest.approx(0.1), True)


def _instance(seed, K=8, G=2):
    r = np.random.default_rng(seed)
    groups = np.sort(r.integers(0, G, K))
    groups[:G] = np.arange(G)
    groups = np.sort(groups)
    posts = []
    for g in range(G):
        p = GroupPosterior(2, 1.0)
        for _ in range(r.integers(1, 40)):
            x = r.normal(1.0, 1.0, 2)
            p.update(x, float(x.sum() + r.normal()))
        posts.append(p)
    return Pool(r.normal(1.0, 1.5, (K, 2)), groups), posts


@pytest.mark.parametrize("seed", range(300))
def test_hybrid_reductions(seed):
    pool, posts = _instance(seed)
    sx = (2.0, 2.0)
    lf, ucb = choose_lf(pool, posts), choose_ucb(pool, posts, R0)
    assert choose_hybrid(pool, posts, RadiusParams(0.0, 1.0, 0.1, 0.0), 1.0, sx).chosen == lf.chosen
    assert choose_hybrid(pool, posts, R0, 0.0, sx).chosen == ucb.chosen
    assert choose_hybrid(pool, posts, R0, 1e9, sx).chosen == lf.chosen


def test_hybrid_mixed_case_prefers_exploring_group():
    # group 0 well estimated, group 1 barely observed: only group 1 crosses its threshold
    posts = [FixedPosterior([1.0], [[1000.0]]), FixedPosterior([0.2], [[1.5]])]
    pool = pool_1d([3.0, 3.0], [0, 1])
    d = choose_hybrid(pool, posts, R0, 1.0, 2.0)
    assert list(d.subsidized) == [False, True]
    exhaustive = [hybrid_index(Candidate(g, pool.x[i], 0, 0, 0), posts[g], R0, 1.0, 2.0)[0]
                  for i, g in enumerate(pool.group)]
    assert d.chosen == int(np.argmax(exhaustive)) == 1
    assert choose_lf(pool, posts).chosen == 0


@given(seed=st.integers(0, 2**31), c=st.floats(0.01, 100))
@settings(max_examples=100, deadline=None)
def test_argmax_scale_invariance(seed, c):
    pool, posts = _instance(seed)
    q = choose_lf(pool, posts).q_hat
    assert int(np.argmax(q * c)) == int(np.argmax(q))
    assert top_k(q * c, 3) == top_k(q, 3)


@given(seed=st.integers(0, 2**31))
@settings(max_examples=100, deadline=None)
def test_argmax_consistency(seed):
    pool, posts = _instance(seed)
    for d in (choose_lf(pool, posts), choose_ucb(pool, posts, R0), choose_hybrid(pool, posts, R0, 1.0, 2.0)):
        assert d.index_used[d.chosen] == np.max(d.index_used)


def test_finalist_examples():
    posts = flat_posts()
    pool = pool_1d([0.9, 0.8, 0.1], [0, 0, 1])
    assert select_finalists(pool, posts, "lf2s", 2) == [0, 1]
    assert select_finalists(pool, posts, "rooney", 2) == [0, 2]
    assert select_finalists(pool_1d([1.0] * 4, [0, 0, 1, 1]), posts, "lf2s", 2) == [0, 1]


def test_rooney_rejects_missing_group():
    with pytest.raises(ValueError, match="no candidates from group"):
        select_finalists(pool_1d([1.0, 2.0], [0, 0]), flat_posts(), "rooney", 2)
    with pytest.raises(ValueError):
        top_k_each_group([1.0, 2.0, 3.0], [0, 1, 2], 2)


def brute_force_rooney(scores, groups, K_F, G):
    best, best_val = None, -np.inf
    for S in combinations(range(len(scores)), K_F):
        if len({groups[i] for i in S}) < G:
            continue
        v = sum(scores[i] for i in S)
        if v > best_val:
            best, best_val = S, v
    return list(best), best_val


def test_rooney_matches_exhaustive_small():
    r = np.random.default_rng(0)
    for _ in range(2000):
        K = int(r.integers(3, 8))
        G = int(r.integers(2, min(K, 4) + 1))
        groups = np.concatenate([np.arange(G), r.integers(0, G, K - G)])
        K_F = int(r.integers(G, K + 1))
        scores = r.normal(size=K)
        got = top_k_each_group(scores, groups, K_F, G)
        want, val = brute_force_rooney(scores, groups, K_F, G)
        assert got == want
        assert len(got) == K_F and len({groups[i] for i in got}) == G


def test_rooney_with_ties_attains_optimum():
    scores = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    groups = [0, 0, 1, 1, 2, 2]
    got = top_k_each_group(scores, groups, 4, 3)
    assert sum(scores[got]) == brute_force_rooney(scores, groups, 4, 3)[1]
    assert got == [0, 1, 2, 4]


def test_hire_from_finalists_examples():
    assert hire_from_finalists([3, 5], np.array([0, 0, 0, 1.0, 0, 2.0]), np.array([0, 0, 0, 1.0, 0, 0.5])) == 5
    q = np.array([0.2, 0.9, 0.5])
    assert hire_from_finalists([0, 2], q, np.zeros(3)) == 2
    assert hire_from_finalists([0, 1], np.array([1.0, 0.0]), np.array([0.0, 3.0])) == 1
    with pytest.raises(ValueError):
        hire_from_finalists([], q, q)


def _step_params(G=2):
    return StepParams(R0, 1.0, (2.0,) * G, 2, G)


def test_rooney_then_lf_boundary():
    posts = flat_posts()
    pool = pool_1d([0.9, 0.8, 0.1], [0, 0, 1])
    eta = np.zeros(3)
    kind = PolicyKind.parse("RooneyThenLF:100")
    assert policy_step(kind, 100, pool, posts, _step_params(), eta).finalists == [0, 2]
    assert policy_step(kind, 101, pool, posts, _step_params(), eta).finalists == [0, 1]


@pytest.mark.parametrize("seed", range(100))
def test_step_reductions(seed):
    pool, posts = _instance(seed)
    params = _step_params()
    assert (policy_step(PolicyKind("Hybrid", a=0.0), 50, pool, posts, params).chosen
            == policy_step(PolicyKind("UCB"), 50, pool, posts, params).chosen)
    assert (policy_step(PolicyKind("WarmStartLF", n0_total=5), 50, pool, posts, params).chosen
            == choose_lf(pool, posts).chosen)
    d = policy_step(PolicyKind("LF2S"), 50, pool, posts, params, np.zeros(len(pool.group)))
    assert d.chosen == choose_lf(pool, posts).chosen
    d = policy_step(PolicyKind("Rooney"), 50, pool, posts, params, np.zeros(len(pool.group)))
    assert d.chosen in d.finalists and {pool.group[i] for i in d.finalists} == {0, 1}


def test_policy_kind_parse():
    assert PolicyKind.parse("Hybrid:0.5").a == 0.5
    assert PolicyKind.parse("RooneyThenLF:100").label() == "RooneyThenLF:100"
    assert PolicyKind.parse("WarmStartLF:50").n0_total == 50
    for bad in ("Foo", "LF:3", "RooneyThenLF", "RooneyThenLF:0", "Hybrid:-1"):
        with pytest.raises(ValueError):
            PolicyKind.parse(bad)
    with pytest.raises(ValueError):
        policy_step(PolicyKind("Rooney"), 1, pool_1d([1.0, 2.0], [0, 1]), flat_posts(), _step_params())
