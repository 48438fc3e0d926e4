"""Named experiment presets and the runner that evaluates them.

Each preset fixes a base market, an optional one-parameter sweep and the
(policy, subsidy) arms compared at every sweep value.  Fixed arms are run
once at the base market and reported alongside the sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

from hiresim.engine import check_pairing, run_batch
from hiresim.metrics import AggregateStats
from hiresim.model import ConfigError, MarketConfig, proportional_split
from hiresim.policies import PolicyKind

# Run count used when neither the caller nor the preset overrides it.
DEFAULT_RUNS = 4000


@dataclass(frozen=True)
class Arm:
    policy: str
    subsidy: str = "none"

    @property
    def label(self) -> str:
        return self.policy if self.subsidy == "none" else f"{self.policy}+{self.subsidy}"


@dataclass(frozen=True)
class Sweep:
    """One swept parameter.  ``name`` is also the CSV column header."""

    name: str
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values:
            raise ValueError(f"sweep {self.name!r} has no values")


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    base: MarketConfig
    arms: tuple[Arm, ...]
    R: int = DEFAULT_RUNS
    sweep: Sweep | None = None
    fixed_arms: tuple[Arm, ...] = ()
    series: tuple[str, ...] = ()  # cumulative series written as CSV tables
    notes: str = ""

    def __post_init__(self):
        if not self.arms:
            raise ValueError(f"preset {self.name!r} has no arms")
        for arm in self.arms + self.fixed_arms:
            check_pairing(self.base, arm.policy, arm.subsidy)

    def point(self, value, arm: Arm) -> tuple[MarketConfig, Arm]:
        """Market and arm at one sweep value."""
        if self.sweep is None:
            return self.base, arm
        return _APPLY[self.sweep.name](self.base, arm, value)


def _set_k1(cfg: MarketConfig, arm: Arm, v) -> tuple[MarketConfig, Arm]:
    k1 = int(v)
    counts = (k1,) + tuple(g.count for g in cfg.groups[1:])
    n0 = (k1,) + tuple(g.n0 for g in cfg.groups[1:])
    return cfg.with_groups(count=counts, n0=n0), arm


def _set_sigma_eta2(cfg: MarketConfig, arm: Arm, v) -> tuple[MarketConfig, Arm]:
    return replace(cfg, sigma_eta=math.sqrt(float(v))), arm


def _set_n0_total(cfg: MarketConfig, arm: Arm, v) -> tuple[MarketConfig, Arm]:
    total = int(v)
    kind = PolicyKind.parse(arm.policy).kind
    if kind in ("LF", "WarmStartLF"):
        return cfg, replace(arm, policy=f"WarmStartLF:{total}")
    n0 = proportional_split(total, [g.count for g in cfg.groups])
    return cfg.with_groups(n0=n0), arm


_APPLY: dict[str, Callable] = {
    "k1": _set_k1,
    "sigma_eta2": _set_sigma_eta2,
    "n0_total": _set_n0_total,
}

_BASE = MarketConfig()
_TWO_STAGE_BASE = replace(_BASE, sigma_eta=1.0)

_PRESETS = {
    p.name: p
    for p in (
        ExperimentPreset(
            "fig1_pu_vs_k1", _BASE, (Arm("LF"),), sweep=Sweep("k1", (2, 10, 30, 100)),
            notes="minority fixed at two candidates; majority initial sample tracks K_1",
        ),
        ExperimentPreset(
            "fig2_lf_vs_ucb", _BASE, (Arm("LF"), Arm("UCB", "ucb_index")), series=("regret",),
        ),
        ExperimentPreset(
            "fig3_ucb_vs_hybrid_regret", _BASE,
            (Arm("UCB", "ucb_index"), Arm("Hybrid", "hybrid_index")), series=("regret",),
        ),
        ExperimentPreset(
            "fig4_index_subsidies", _BASE,
            (Arm("UCB", "ucb_index"), Arm("Hybrid", "hybrid_index")), series=("subsidy",),
        ),
        ExperimentPreset(
            "fig5_costsaving_subsidies", _BASE,
            (Arm("UCB", "cost_saving"), Arm("Hybrid", "hybrid_index"), Arm("Hybrid", "cost_saving")),
            series=("subsidy",),
        ),
        ExperimentPreset(
            "fig6_costsaving_long", replace(_BASE, N=10000),
            (Arm("UCB", "cost_saving"), Arm("Hybrid", "hybrid_index"), Arm("Hybrid", "cost_saving")),
            R=50, series=("subsidy",),
        ),
        ExperimentPreset(
            "fig7_rooney_pu", _TWO_STAGE_BASE, (Arm("LF2S"), Arm("Rooney")),
            sweep=Sweep("sigma_eta2", (0.25, 1.0, 4.0, 16.0)),
            notes="interview-signal variance grid is an implementation choice",
        ),
        ExperimentPreset(
            "fig8_rooney_regret", _TWO_STAGE_BASE,
            (Arm("LF2S"), Arm("Rooney"), Arm("RooneyThenLF:100")),
            series=("u2s_regret", "c2s_regret"),
            notes="interview-signal variance 1 is an implementation choice",
        ),
        ExperimentPreset(
            "appB_warmstart_pu", _BASE, (Arm("LF"),),
            sweep=Sweep("n0_total", (0, 12, 20, 50, 100)),
            fixed_arms=(Arm("Hybrid", "cost_saving"),),
            notes="warm-start totals are an implementation choice; split in proportion to group sizes",
        ),
        ExperimentPreset(
            "appB_warmstart_subsidy", _BASE, (Arm("LF"),),
            sweep=Sweep("n0_total", (0, 12, 20, 50, 100)),
            fixed_arms=(Arm("Hybrid", "cost_saving"),),
            notes="uniform-sampling budget is the estimated-skill gap paid during forced hires",
        ),
    )
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> ExperimentPreset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ConfigError(f"preset: unknown preset {name!r}; expected one of {', '.join(PRESET_NAMES)}") from None


@dataclass
class PresetEntry:
    value: float | None  # sweep value, None for fixed arms and unswept presets
    arm: Arm
    config: MarketConfig
    stats: AggregateStats


@dataclass
class PresetResult:
    preset: ExperimentPreset
    R: int
    entries: list[PresetEntry] = field(default_factory=list)


def scaled_runs(R: int, scale: float) -> int:
    if not scale > 0:
        raise ValueError("scale must be positive")
    return max(1, int(round(R * scale)))


def run_preset(p: ExperimentPreset, R: int | None = None, workers: int | None = 1,
               progress: Callable[[str], None] | None = None) -> PresetResult:
    """Evaluate every (sweep value, arm) point and every fixed arm."""
    R = p.R if R is None else int(R)
    out = PresetResult(p, R)
    values = p.sweep.values if p.sweep else (None,)
    jobs = [(v, arm) for v in values for arm in p.arms] + [(None, arm) for arm in p.fixed_arms]
    for v, arm in jobs:
        cfg, a = p.point(v, arm) if v is not None else (p.base, arm)
        if progress:
            progress(f"{p.name}: {a.label}" + ("" if v is None else f" at {p.sweep.name}={v:g}"))
        stats = run_batch(cfg, a.policy, a.subsidy, R, workers)
        out.entries.append(PresetEntry(v, a, cfg, stats))
    return out
