"""Monte Carlo simulator of social learning and statistical discrimination in
a sequential hiring market.

Firms hire one worker per round using group-wise ridge estimates of skill.
The package compares laissez-faire hiring with UCB and hybrid subsidy
mechanisms and with the Rooney Rule in a two-stage interview model.
"""

from hiresim.engine import run_batch, run_single, run_traces
from hiresim.metrics import AggregateStats, RunTrace, aggregate, detect_pu
from hiresim.model import ConfigError, GroupSpec, MarketConfig
from hiresim.policies import PolicyKind

__all__ = [
    "AggregateStats",
    "ConfigError",
    "GroupSpec",
    "MarketConfig",
    "PolicyKind",
    "RunTrace",
    "aggregate",
    "detect_pu",
    "run_batch",
    "run_single",
    "run_traces",
]

__version__ = "0.1.0"
