import math
from dataclasses import replace

import numpy as np
import pytest

from hiresim.model import (
    Candidate, ConfigError, GroupSpec, MarketConfig, draw_market, draw_round,
    initial_sampling_plan, proportional_split, realized_skill,
)


def test_defaults_are_baseline():
    cfg = MarketConfig()
    assert (cfg.d, cfg.sigma_eps, cfg.lambda_reg, cfg.N, cfg.delta) == (1, 2.0, 1.0, 1000, 0.1)
    assert [g.count for g in cfg.groups] == [10, 2]
    assert [g.n0 for g in cfg.groups] == [10, 2]
    assert all(g.mu_x == (3.0,) and g.sigma_x == 2.0 for g in cfg.groups)
    assert cfg.S == 1.0 and cfg.K == 12 and cfg.n0_total == 12


@pytest.mark.parametrize("change, path", [
    (dict(delta=1.5), "delta"),
    (dict(delta=0.0), "delta"),
    (dict(lambda_reg=0.0), "lambda_reg"),
    (dict(N=12), "N"),
    (dict(K_F=13), "K_F"),
    (dict(radius_variant="nope"), "radius_variant"),
    (dict(S_bound=0.5), "S_bound"),
    (dict(sigma_eps=-1.0), "sigma_eps"),
])
def test_validation_reports_field(change, path):
    with pytest.raises(ConfigError, match=f"^{path}"):
        replace(MarketConfig(), **change)


def test_delta_message():
    with pytest.raises(ConfigError, match="delta must lie in \\(0,1\\)"):
        MarketConfig(delta=1.5)


def test_group_validation():
    with pytest.raises(ConfigError, match=r"groups\[1\].count"):
        MarketConfig().with_groups(count=(10, 0))
    with pytest.raises(ConfigError, match=r"groups\[0\].mu_x"):
        MarketConfig(groups=(GroupSpec("a", 2, (1.0, 2.0), 1.0, (1.0,)),))


def test_round_shape_and_order():
    cfg = MarketConfig()
    cands = draw_round(cfg, 0, 5)
    assert len(cands) == 12
    assert [c.group for c in cands] == [0] * 10 + [1] * 2
    for c in cands:
        assert c.q_true == pytest.approx(float(np.dot(c.x, cfg.groups[c.group].theta)), abs=0)


def test_zero_sigma_x_gives_means():
    cfg = MarketConfig().with_groups(sigma_x=(0.0, 0.0), mu_x=((3.0,), (1.5,)))
    m = draw_market(cfg, 0)
    assert np.all(m.x[:, :10, 0] == 3.0) and np.all(m.x[:, 10:, 0] == 1.5)


def test_round_replay_is_bit_identical():
    cfg = replace(MarketConfig(), sigma_eta=1.0)
    m = draw_market(cfg, 4)
    a, b = draw_round(cfg, 4, 17), draw_round(cfg, 4, 17)
    for c1, c2, k in zip(a, b, range(cfg.K)):
        assert c1.x.tobytes() == c2.x.tobytes() and c1.eps == c2.eps and c1.eta == c2.eta
        assert c1.x[0] == m.x[16, k, 0] and c1.eps == m.eps[16, k] and c1.eta == m.eta[16, k]


def test_characteristic_moments():
    cfg = replace(MarketConfig(), N=10000).with_groups(count=(10, 2))
    x = draw_market(cfg, 0).x[:, 0, 0]  # 10^4 draws from one slot
    x = np.concatenate([x, draw_market(cfg, 1).x[:, :9, 0].ravel()])[:100000]
    assert x.size == 100000
    assert abs(x.mean() - 3) <= 3 * 2 / math.sqrt(x.size)
    assert abs(x.var() / 4 - 1) < 0.05


def test_realized_skill():
    c = Candidate(0, np.array([1.0]), 1.0, 0.0, 0.0)
    assert realized_skill(c, "one_stage") == realized_skill(c, "two_stage") == 1.0
    c = Candidate(0, np.array([1.0]), 1.0, 0.5, 2.0)
    assert realized_skill(c, "one_stage") == 1.5 and realized_skill(c, "two_stage") == 3.5


def test_two_stage_noise_variance():
    cfg = replace(MarketConfig(), sigma_eta=1.5, N=10000)
    m = draw_market(cfg, 2)
    noise = (m.eps + m.eta)[:, :10].ravel()
    assert abs(noise.var() / (1.5**2 + 2.0**2) - 1) < 0.05


def test_symmetric_groups_exchangeable():
    ks = pytest.importorskip("scipy.stats").ks_2samp
    cfg = replace(MarketConfig(), N=10000).with_groups(count=(2, 2), n0=(2, 2))
    x = draw_market(cfg, 0).x[..., 0]
    assert ks(x[:, :2].ravel(), x[:, 2:].ravel()).statistic < 0.02


@pytest.mark.parametrize("n0, plan", [
    ((10, 2), [0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1]),
    ((0, 0), []),
    ((4, 2), [0, 0, 1, 0, 0, 1]),
    ((1, 1), [0, 1]),
    ((0, 3), [1, 1, 1]),
])
def test_initial_sampling_plan(n0, plan):
    assert initial_sampling_plan(n0) == plan


def test_plan_counts_match_n0():
    for n0 in [(7, 3), (1, 5), (12, 0), (3, 3, 3), (5, 1, 2)]:
        plan = initial_sampling_plan(n0)
        assert [plan.count(g) for g in range(len(n0))] == list(n0)


@pytest.mark.parametrize("total, counts, want", [
    (12, (10, 2), [10, 2]),
    (20, (10, 2), [17, 3]),
    (50, (10, 2), [42, 8]),
    (0, (10, 2), [0, 0]),
    (100, (10, 2), [83, 17]),
])
def test_proportional_split(total, counts, want):
    got = proportional_split(total, counts)
    assert got == want and sum(got) == total
