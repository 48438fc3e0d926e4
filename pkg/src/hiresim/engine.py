"""Single-run loop and the parallel Monte Carlo batch runner."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from hiresim import backend
from hiresim.estimator import RadiusParams
from hiresim.metrics import AggregateStats, RunTrace, aggregate
from hiresim.model import ConfigError, MarketConfig, draw_market, initial_sampling_plan, proportional_split
from hiresim.policies import PolicyKind
from hiresim.subsidy import VALID_PAIRS

_POLICY_CODES = {"LF": 0, "UCB": 1, "Hybrid": 2, "LF2S": 3, "Rooney": 4, "RooneyThenLF": 5,
                 "WarmStartLF": 6}
_SUBSIDY_CODES = {"none": 0, "ucb_index": 1, "hybrid_index": 1, "cost_saving": 2}
_VARIANT_CODES = {"det_based": 0, "L_based": 1, "bayes": 2}

WORKERS_ENV = "HIRESIM_WORKERS"


def _as_policy(policy) -> PolicyKind:
    return policy if isinstance(policy, PolicyKind) else PolicyKind.parse(str(policy))


def effective_config(config: MarketConfig, policy) -> MarketConfig:
    """Config the run actually uses: a warm-start policy replaces the initial
    sample sizes by its total split in proportion to group sizes."""
    policy = _as_policy(policy)
    if policy.kind == "WarmStartLF":
        n0 = proportional_split(policy.n0_total, [g.count for g in config.groups])
        if policy.n0_total >= config.N:
            raise ConfigError(f"policy.n0_total: warm start {policy.n0_total} must be below N={config.N}")
        return config.with_groups(n0=n0)
    return config


def check_pairing(config: MarketConfig, policy, subsidy_rule: str) -> PolicyKind:
    policy = _as_policy(policy)
    allowed = VALID_PAIRS[policy.kind]
    if subsidy_rule not in allowed:
        raise ConfigError(
            f"subsidy: rule {subsidy_rule!r} cannot implement policy {policy.kind}; "
            f"use one of {', '.join(allowed)}"
        )
    if policy.two_stage and config.K_F < config.G:
        raise ConfigError(
            f"K_F: two-stage runs need at least one finalist per group (K_F >= {config.G})"
        )
    return policy


def radius_params(config: MarketConfig) -> RadiusParams:
    return RadiusParams(config.sigma_eps, config.lambda_reg, config.delta, config.S,
                        config.radius_variant, config.N)


def run_single(config: MarketConfig, policy, subsidy_rule: str = "none", run_index: int = 0) -> RunTrace:
    """One replication, fully determined by ``(config.seed, run_index)``."""
    policy = check_pairing(config, policy, subsidy_rule)
    cfg = effective_config(config, policy)
    market = draw_market(cfg, run_index)
    schedule = initial_sampling_plan(cfg)
    if backend.use_compiled():
        return _run_compiled(cfg, policy, subsidy_rule, market, schedule)
    from hiresim._pyloop import run_market

    return run_market(cfg, policy, subsidy_rule, market, schedule, radius_params(cfg))


def _run_compiled(cfg, policy, subsidy_rule, market, schedule) -> RunTrace:
    a = cfg.a_hybrid if policy.a is None else policy.a
    out = backend._core.run_loop(
        market.x, market.q, market.eps, market.eta,
        np.ascontiguousarray(market.slot_group, dtype=np.int_),
        np.asarray(schedule, dtype=np.int_),
        np.array([g.theta for g in cfg.groups], dtype=float),
        np.array([g.sigma_x for g in cfg.groups], dtype=float),
        _POLICY_CODES[policy.kind], _SUBSIDY_CODES[subsidy_rule], policy.switch_round or 0,
        float(a), cfg.K_F, cfg.sigma_eps, cfg.lambda_reg, cfg.delta, cfg.S,
        _VARIANT_CODES[cfg.radius_variant], cfg.N,
    )
    return RunTrace(n0=len(schedule), N=cfg.N, **out)


def _run_chunk(args) -> list[RunTrace]:
    config, policy, subsidy_rule, indices, backend_name = args
    backend.force(backend_name)
    return [run_single(config, policy, subsidy_rule, i) for i in indices]


def resolve_workers(workers: int | None) -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    if workers is None:
        return os.cpu_count() or 1
    return max(1, int(workers))


def run_traces(config: MarketConfig, policy, subsidy_rule: str = "none", R: int = 1,
               workers: int | None = 1) -> list[RunTrace]:
    """Traces of runs ``0..R-1``, in run order regardless of scheduling."""
    if R < 1:
        raise ValueError("R must be at least 1")
    policy = check_pairing(config, policy, subsidy_rule)
    effective_config(config, policy)  # surface config faults before forking
    workers = min(resolve_workers(workers), R)
    if workers == 1:
        return [run_single(config, policy, subsidy_rule, i) for i in range(R)]
    chunks = [list(range(w, R, workers)) for w in range(workers)]
    name = backend.name()
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_run_chunk, [(config, policy, subsidy_rule, c, name) for c in chunks]))
    traces: list[RunTrace | None] = [None] * R
    for c, part in zip(chunks, parts):
        for i, tr in zip(c, part):
            traces[i] = tr
    return traces  # type: ignore[return-value]


def run_batch(config: MarketConfig, policy, subsidy_rule: str = "none", R: int = 1,
              workers: int | None = 1) -> AggregateStats:
    return aggregate(run_traces(config, policy, subsidy_rule, R, workers))


__all__ = ["run_single", "run_batch", "run_traces", "effective_config", "radius_params"]
