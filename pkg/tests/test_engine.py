import os
from dataclasses import replace

import numpy as np
import pytest

from hiresim import backend
from hiresim.engine import effective_config, resolve_workers, run_batch, run_single, run_traces
from hiresim.metrics import aggregate
from hiresim.model import ConfigError, MarketConfig

CFG = MarketConfig()
CASES = [
    (CFG, "LF", "none"),
    (CFG, "UCB", "ucb_index"),
    (CFG, "UCB", "cost_saving"),
    (CFG, "Hybrid", "hybrid_index"),
    (CFG, "Hybrid", "cost_saving"),
    (CFG, "WarmStartLF:30", "none"),
    (replace(CFG, sigma_eta=2.0), "LF2S", "none"),
    (replace(CFG, sigma_eta=2.0), "Rooney", "none"),
    (replace(CFG, sigma_eta=2.0), "RooneyThenLF:100", "none"),
    (replace(CFG, radius_variant="L_based"), "UCB", "ucb_index"),
    (replace(CFG, radius_variant="bayes"), "Hybrid", "hybrid_index"),
]


@pytest.mark.parametrize("cfg, policy, subsidy", CASES)
def test_replay_is_bit_identical(each_backend, cfg, policy, subsidy):
    a = run_single(cfg, policy, subsidy, 5)
    b = run_single(cfg, policy, subsidy, 5)
    assert a.equals(b)


@pytest.mark.parametrize("cfg, policy, subsidy", CASES)
def test_backends_agree(compiled_backend, cfg, policy, subsidy):
    a = run_single(replace(cfg, N=400), policy, subsidy, 2)
    backend.force("python")
    b = run_single(replace(cfg, N=400), policy, subsidy, 2)
    np.testing.assert_array_equal(a.chosen_group, b.chosen_group)
    for k, v in a.__dict__.items():
        if isinstance(v, np.ndarray):
            np.testing.assert_allclose(v, b.__dict__[k], rtol=1e-9, atol=1e-9, err_msg=k)
        else:
            assert v == pytest.approx(b.__dict__[k], rel=1e-9)


def test_degenerate_market_has_zero_regret(each_backend):
    cfg = replace(CFG, sigma_eps=0.0).with_groups(sigma_x=(0.0, 0.0))
    t = run_single(cfg, "LF", "none", 0)
    assert np.all(t.regret_inc == 0.0)


@pytest.mark.parametrize("cfg, policy, subsidy", [c for c in CASES if c[1] in ("UCB", "Hybrid")])
def test_subsidy_implements_every_round(each_backend, cfg, policy, subsidy):
    for i in range(3):
        t = run_single(cfg, policy, subsidy, i)
        assert t.implements_failures == 0
        assert np.all(t.cs_paid <= t.index_paid)
        assert np.all(t.subsidy_paid >= 0)


@pytest.mark.parametrize("cfg, policy, subsidy", CASES)
def test_trace_invariants(cfg, policy, subsidy):
    t = run_single(cfg, policy, subsidy, 1)
    cfg_eff = effective_config(cfg, policy)
    assert len(t.regret_inc) == cfg.N - cfg_eff.n0_total
    # hire counts include the initial sample and grow by one per round
    n0 = np.array([g.n0 for g in cfg_eff.groups])
    main = np.stack([np.cumsum(t.chosen_group == g) for g in range(cfg.G)], axis=1)
    np.testing.assert_array_equal(t.hires, n0 + main)
    assert np.all(t.min_eig >= cfg.lambda_reg)
    # budget identity: the cumulative series is the plain sum of the per-round payments
    assert t.cum_subsidy[-1] == np.cumsum(t.subsidy_paid)[-1]
    if t.u2s_inc is None:
        assert np.all(t.regret_inc >= 0)


def test_width_shrinks():
    # d = 1: the width at x = 1 is radius / sqrt(V_bar)
    w100, w1000 = [], []
    for i in range(30):
        t = run_single(CFG, "UCB", "ucb_index", i)
        w = t.radius / np.sqrt(t.min_eig)
        w100.append(w[100 - t.n0 - 1])
        w1000.append(w[-1])
    assert np.all(np.median(w1000, axis=0) < np.median(w100, axis=0))


def test_warm_start_overrides_n0():
    cfg = effective_config(CFG, "WarmStartLF:50")
    assert [g.n0 for g in cfg.groups] == [42, 8]
    assert run_single(CFG, "WarmStartLF:0", "none", 0).n0 == 0
    with pytest.raises(ConfigError):
        effective_config(CFG, "WarmStartLF:1000")


@pytest.mark.parametrize("policy, subsidy", [("LF", "ucb_index"), ("UCB", "none"), ("UCB", "hybrid_index"),
                                             ("Rooney", "cost_saving")])
def test_invalid_pairings(policy, subsidy):
    with pytest.raises(ConfigError, match="subsidy"):
        run_single(CFG, policy, subsidy, 0)


def test_two_stage_needs_finalist_per_group():
    cfg = replace(CFG, K_F=1)
    with pytest.raises(ConfigError, match="K_F"):
        run_single(cfg, "Rooney", "none", 0)


def test_batch_of_one_equals_single():
    a = run_batch(CFG, "UCB", "ucb_index", 1)
    b = aggregate([run_single(CFG, "UCB", "ucb_index", 0)])
    for k in a.series:
        assert a.series[k].mean.tobytes() == b.series[k].mean.tobytes()


def test_batch_independent_of_workers():
    one = run_traces(CFG, "Hybrid", "hybrid_index", 11, workers=1)
    eight = run_traces(CFG, "Hybrid", "hybrid_index", 11, workers=8)
    assert all(a.equals(b) for a, b in zip(one, eight))
    a, b = aggregate(one), aggregate(eight)
    for k in a.series:
        for f in ("mean", "p5", "p95", "std"):
            assert getattr(a.series[k], f).tobytes() == getattr(b.series[k], f).tobytes()


def test_worker_env_override(monkeypatch):
    monkeypatch.setenv("HIRESIM_WORKERS", "3")
    assert resolve_workers(1) == 3
    monkeypatch.delenv("HIRESIM_WORKERS")
    assert resolve_workers(2) == 2
    assert resolve_workers(None) == (os.cpu_count() or 1)


def test_runs_must_be_positive():
    with pytest.raises(ValueError):
        run_batch(CFG, "LF", "none", 0)
