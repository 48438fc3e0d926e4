"""Market primitives: configuration, candidate draws, realized skills and the
initial sampling schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from hiresim import rng as _rng

RADIUS_VARIANTS = ("det_based", "L_based", "bayes")


class ConfigError(ValueError):
    """Invalid market configuration; message starts with the offending field path."""


@dataclass(frozen=True)
class GroupSpec:
    label: str
    count: int
    mu_x: tuple[float, ...]
    sigma_x: float
    theta: tuple[float, ...]
    n0: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mu_x", tuple(float(v) for v in self.mu_x))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))

    @property
    def theta_norm(self) -> float:
        return math.sqrt(sum(t * t for t in self.theta))


@dataclass(frozen=True)
class MarketConfig:
    """Full parameterization of one simulated market.

    Defaults reproduce the baseline experiment: one characteristic with mean
    3 and scale 2, skill noise 2, ridge parameter 1, 1000 firms, ten majority
    and two minority candidates per round, and an initial sample of one round
    per arriving candidate slot.
    """

    d: int = 1
    groups: tuple[GroupSpec, ...] = field(
        default_factory=lambda: (
            GroupSpec("majority", 10, (3.0,), 2.0, (1.0,), 10),
            GroupSpec("minority", 2, (3.0,), 2.0, (1.0,), 2),
        )
    )
    sigma_eps: float = 2.0
    sigma_eta: float = 0.0
    N: int = 1000
    lambda_reg: float = 1.0
    delta: float = 0.1
    S_bound: float | None = None
    a_hybrid: float = 1.0
    K_F: int = 2
    radius_variant: str = "det_based"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        self.validate()

    def validate(self) -> None:
        def bad(path: str, msg: str):
            raise ConfigError(f"{path}: {msg}")

        if not isinstance(self.d, int) or self.d < 1:
            bad("d", "dimension must be a positive integer")
        if len(self.groups) < 1:
            bad("groups", "at least one group is required")
        labels = set()
        for i, g in enumerate(self.groups):
            p = f"groups[{i}]"
            if g.label in labels:
                bad(f"{p}.label", f"duplicate label {g.label!r}")
            labels.add(g.label)
            if not isinstance(g.count, int) or g.count < 1:
                bad(f"{p}.count", "candidates per round must be a positive integer")
            if len(g.mu_x) != self.d:
                bad(f"{p}.mu_x", f"length {len(g.mu_x)} does not match d={self.d}")
            if len(g.theta) != self.d:
                bad(f"{p}.theta", f"length {len(g.theta)} does not match d={self.d}")
            if not g.sigma_x >= 0 or not math.isfinite(g.sigma_x):
                bad(f"{p}.sigma_x", "must be a finite nonnegative number")
            if not isinstance(g.n0, int) or g.n0 < 0:
                bad(f"{p}.n0", "initial-sampling rounds must be a nonnegative integer")
        for name in ("sigma_eps", "sigma_eta"):
            v = getattr(self, name)
            if not v >= 0 or not math.isfinite(v):
                bad(name, "must be a finite nonnegative number")
        if not self.lambda_reg > 0:
            bad("lambda_reg", "lambda must be positive")
        if not 0 < self.delta < 1:
            bad("delta", "delta must lie in (0,1)")
        if not self.a_hybrid >= 0:
            bad("a_hybrid", "a must be nonnegative")
        if not isinstance(self.N, int) or self.N <= self.n0_total:
            bad("N", f"horizon must exceed the initial sampling length {self.n0_total}")
        if not isinstance(self.K_F, int) or not 1 <= self.K_F <= self.K:
            bad("K_F", f"number of finalists must lie in [1, {self.K}]")
        if self.radius_variant not in RADIUS_VARIANTS:
            bad("radius_variant", f"must be one of {', '.join(RADIUS_VARIANTS)}")
        if self.S_bound is not None:
            worst = max(g.theta_norm for g in self.groups)
            if not self.S_bound >= worst * (1 - 1e-12):
                bad("S_bound", f"must be at least max ||theta_g|| = {worst:.6g}")
        if not isinstance(self.seed, int) or self.seed < 0:
            bad("seed", "must be a nonnegative integer")

    @property
    def K(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def G(self) -> int:
        return len(self.groups)

    @property
    def n0_total(self) -> int:
        return sum(g.n0 for g in self.groups)

    @property
    def S(self) -> float:
        if self.S_bound is not None:
            return float(self.S_bound)
        return max(g.theta_norm for g in self.groups)

    def slot_groups(self) -> np.ndarray:
        """Group index of every candidate slot, in declaration order."""
        return np.repeat(np.arange(self.G), [g.count for g in self.groups])

    def with_groups(self, **changes) -> "MarketConfig":
        """Copy with per-group fields replaced; values are sequences over groups."""
        groups = list(self.groups)
        for key, values in changes.items():
            groups = [replace(g, **{key: v}) for g, v in zip(groups, values)]
        return replace(self, groups=tuple(groups))


@dataclass(frozen=True)
class Candidate:
    group: int
    x: np.ndarray
    q_true: float
    eps: float
    eta: float


@dataclass
class Market:
    """All exogenous draws of one replication, rounds ``1..N`` along axis 0."""

    x: np.ndarray  # (N, K, d)
    q: np.ndarray  # (N, K)
    eps: np.ndarray  # (N, K)
    eta: np.ndarray  # (N, K)
    slot_group: np.ndarray  # (K,)


def _draw(config: MarketConfig, key: int, rounds) -> tuple[np.ndarray, ...]:
    K, d = config.K, config.d
    sg = config.slot_groups()
    mu = np.array([g.mu_x for g in config.groups])[sg]  # (K, d)
    sx = np.array([g.sigma_x for g in config.groups])[sg][:, None]
    theta = np.array([g.theta for g in config.groups])[sg]
    x = mu + sx * _rng.normals(key, _rng.PURPOSE_X, rounds, K, d)
    q = np.einsum("nkd,kd->nk", x, theta)
    eps = config.sigma_eps * _rng.normals(key, _rng.PURPOSE_EPS, rounds, K, 1)[..., 0]
    if config.sigma_eta > 0:
        eta = config.sigma_eta * _rng.normals(key, _rng.PURPOSE_ETA, rounds, K, 1)[..., 0]
    else:
        eta = np.zeros_like(eps)
    return x, q, eps, eta


def draw_market(config: MarketConfig, run_index: int) -> Market:
    """Draw every round of one replication at once."""
    key = _rng.stream_key(config.seed, run_index)
    x, q, eps, eta = _draw(config, key, np.arange(1, config.N + 1))
    return Market(x, q, eps, eta, config.slot_groups())


def draw_round(config: MarketConfig, run_index: int, n: int) -> list[Candidate]:
    """Candidates arriving in round ``n`` (1-based) of replication ``run_index``.

    Groups appear in declaration order, then by slot.  Identical to row ``n-1``
    of :func:`draw_market`.
    """
    key = _rng.stream_key(config.seed, run_index)
    x, q, eps, eta = _draw(config, key, [n])
    return [
        Candidate(int(g), x[0, k], float(q[0, k]), float(eps[0, k]), float(eta[0, k]))
        for k, g in enumerate(config.slot_groups())
    ]


def realized_skill(c: Candidate, stage_mode: str = "one_stage") -> float:
    if stage_mode == "one_stage":
        return c.q_true + c.eps
    if stage_mode == "two_stage":
        return c.q_true + c.eta + c.eps
    raise ValueError(f"unknown stage mode {stage_mode!r}")


def initial_sampling_plan(config_or_n0: MarketConfig | Sequence[int]) -> list[int]:
    """Group index hired in each initial-sampling round.

    Groups are interleaved proportionally: the k-th sample of group g is due
    at fraction k / n0_g of the phase, entries sorted by due time with ties
    going to the earlier group.  ``(4, 2)`` gives ``[0, 0, 1, 0, 0, 1]``.
    """
    if isinstance(config_or_n0, MarketConfig):
        n0 = [g.n0 for g in config_or_n0.groups]
    else:
        n0 = list(config_or_n0)
    if any(v < 0 for v in n0):
        raise ValueError("initial sample sizes must be nonnegative")
    due = [(Fraction(k, c), g) for g, c in enumerate(n0) for k in range(1, c + 1)]
    return [g for _, g in sorted(due)]


def proportional_split(total: int, counts: Sequence[int]) -> list[int]:
    """Split ``total`` across groups in proportion to ``counts`` (largest remainder)."""
    K = sum(counts)
    exact = [Fraction(total * c, K) for c in counts]
    base = [int(math.floor(e)) for e in exact]
    rest = total - sum(base)
    order = sorted(range(len(counts)), key=lambda g: (-(exact[g] - base[g]), g))
    for g in order[:rest]:
        base[g] += 1
    return base
