"""Decision rules: laissez-faire, UCB, hybrid, and the two-stage finalist rules.

All argmax operations break ties toward the lowest candidate index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from hiresim.estimator import GroupPosterior, RadiusParams, conf_radius

ONE_STAGE = ("LF", "UCB", "Hybrid", "WarmStartLF")
TWO_STAGE = ("LF2S", "Rooney", "RooneyThenLF")
KINDS = ONE_STAGE + TWO_STAGE


@dataclass(frozen=True)
class PolicyKind:
    kind: str
    a: float | None = None
    switch_round: int | None = None
    n0_total: int | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.a is not None and not self.a >= 0:
            raise ValueError("hybrid parameter a must be nonnegative")
        if self.kind == "RooneyThenLF":
            if self.switch_round is None or self.switch_round < 1:
                raise ValueError("RooneyThenLF needs switch_round >= 1")
        if self.kind == "WarmStartLF":
            if self.n0_total is None or self.n0_total < 0:
                raise ValueError("WarmStartLF needs n0_total >= 0")

    @property
    def two_stage(self) -> bool:
        return self.kind in TWO_STAGE

    @classmethod
    def parse(cls, text: str) -> "PolicyKind":
        """Parse ``LF``, ``Hybrid:0.5``, ``RooneyThenLF:100``, ``WarmStartLF:50``..."""
        name, _, arg = text.partition(":")
        if not arg:
            return cls(name)
        if name == "Hybrid":
            return cls(name, a=float(arg))
        if name == "RooneyThenLF":
            return cls(name, switch_round=int(arg))
        if name == "WarmStartLF":
            return cls(name, n0_total=int(arg))
        raise ValueError(f"policy {name!r} takes no argument")

    def label(self) -> str:
        if self.kind == "Hybrid" and self.a is not None:
            return f"Hybrid:{self.a:g}"
        if self.kind == "RooneyThenLF":
            return f"RooneyThenLF:{self.switch_round}"
        if self.kind == "WarmStartLF":
            return f"WarmStartLF:{self.n0_total}"
        return self.kind


@dataclass
class Decision:
    chosen: int
    q_hat: np.ndarray
    width: np.ndarray
    index_used: np.ndarray
    finalists: list[int] | None = None
    rule_tag: str = ""
    subsidized: np.ndarray | None = field(default=None, repr=False)


class Pool(NamedTuple):
    """Array view of one round's candidates."""

    x: np.ndarray  # (K, d)
    group: np.ndarray  # (K,)


def as_pool(candidates) -> Pool:
    if isinstance(candidates, Pool):
        return candidates
    return Pool(np.array([c.x for c in candidates], dtype=float),
                np.array([c.group for c in candidates], dtype=int))


def estimates(candidates, posteriors: Sequence[GroupPosterior]) -> np.ndarray:
    pool = as_pool(candidates)
    return np.array([posteriors[g].predict(x) for x, g in zip(pool.x, pool.group)])


def widths(candidates, posteriors: Sequence[GroupPosterior], r: RadiusParams) -> np.ndarray:
    pool = as_pool(candidates)
    radii = [conf_radius(p, r) for p in posteriors]
    return np.array([radii[g] * posteriors[g].weighted_norm(x) for x, g in zip(pool.x, pool.group)])


def argmax_first(values) -> int:
    return int(np.argmax(values))


def choose_lf(candidates, posteriors) -> Decision:
    q_hat = estimates(candidates, posteriors)
    return Decision(argmax_first(q_hat), q_hat, np.zeros_like(q_hat), q_hat, rule_tag="LF")


def choose_ucb(candidates, posteriors, radius_params: RadiusParams) -> Decision:
    q_hat = estimates(candidates, posteriors)
    w = widths(candidates, posteriors, radius_params)
    q_tilde = q_hat + w
    return Decision(argmax_first(q_tilde), q_hat, w, q_tilde, rule_tag="UCB")


def hybrid_threshold(posterior: GroupPosterior, a: float, sigma_x: float) -> float:
    return a * sigma_x * float(np.linalg.norm(posterior.theta_hat))


def hybrid_index(candidate, posterior: GroupPosterior, radius_params: RadiusParams,
                 a: float, sigma_x: float) -> tuple[float, bool]:
    """Hybrid index of one candidate and whether it is the optimistic branch."""
    q_hat = posterior.predict(candidate.x)
    w = conf_radius(posterior, radius_params) * posterior.weighted_norm(candidate.x)
    if w > hybrid_threshold(posterior, a, sigma_x):
        return q_hat + w, True
    return q_hat, False


def _per_group(sigma_x, n_groups: int) -> np.ndarray:
    arr = np.asarray(sigma_x, dtype=float)
    return np.full(n_groups, float(arr)) if arr.ndim == 0 else arr


def choose_hybrid(candidates, posteriors, radius_params: RadiusParams, a: float, sigma_x) -> Decision:
    """``sigma_x`` is a scalar or one characteristic scale per group."""
    pool = as_pool(candidates)
    q_hat = estimates(pool, posteriors)
    w = widths(pool, posteriors, radius_params)
    sx = _per_group(sigma_x, len(posteriors))
    thresholds = np.array([hybrid_threshold(posteriors[g], a, sx[g]) for g in pool.group])
    on = w > thresholds
    index = np.where(on, q_hat + w, q_hat)
    return Decision(argmax_first(index), q_hat, w, index, rule_tag="Hybrid", subsidized=on)


def _order(scores: np.ndarray) -> np.ndarray:
    # descending score, ascending index on ties
    return np.lexsort((np.arange(len(scores)), -scores))


def top_k(scores, K_F: int) -> list[int]:
    scores = np.asarray(scores, dtype=float)
    if not 1 <= K_F <= len(scores):
        raise ValueError("K_F must lie in [1, number of candidates]")
    return sorted(int(i) for i in _order(scores)[:K_F])


def top_k_each_group(scores, groups, K_F: int, n_groups: int | None = None) -> list[int]:
    """Best ``K_F`` candidates by score with at least one from every group.

    Exact: any feasible set can swap its members of group g for g's best
    candidate without losing value, so the optimum holds every group's best
    and fills the remaining places with the best of the rest.
    """
    scores = np.asarray(scores, dtype=float)
    groups = np.asarray(groups)
    n_groups = int(groups.max()) + 1 if n_groups is None else n_groups
    if K_F < n_groups:
        raise ValueError("Rooney selection needs K_F >= number of groups")
    if K_F > len(scores):
        raise ValueError("K_F exceeds the number of candidates")
    order = _order(scores)
    picked: list[int] = []
    seen = set()
    for i in order:
        g = int(groups[i])
        if g not in seen:
            seen.add(g)
            picked.append(int(i))
    if len(seen) < n_groups:
        missing = sorted(set(range(n_groups)) - seen)
        raise ValueError(f"Rooney selection impossible: no candidates from group(s) {missing}")
    chosen = set(picked)
    for i in order:
        if len(picked) >= K_F:
            break
        if int(i) not in chosen:
            picked.append(int(i))
            chosen.add(int(i))
    return sorted(picked)


def select_finalists(candidates, posteriors, mode: str, K_F: int, n_groups: int | None = None) -> list[int]:
    pool = as_pool(candidates)
    q_hat = estimates(pool, posteriors)
    if mode == "lf2s":
        return top_k(q_hat, K_F)
    if mode == "rooney":
        return top_k_each_group(q_hat, pool.group, K_F, n_groups or len(posteriors))
    raise ValueError(f"unknown finalist mode {mode!r}")


def hire_from_finalists(finalists: Sequence[int], q_hat, eta) -> int:
    """Finalist with the largest ``q_hat + eta`` (interview signal observed)."""
    if not finalists:
        raise ValueError("no finalists")
    finalists = sorted(finalists)
    q_hat = np.asarray(q_hat, dtype=float)
    eta = np.asarray(eta, dtype=float)
    values = q_hat[finalists] + eta[finalists]
    return finalists[argmax_first(values)]


@dataclass(frozen=True)
class StepParams:
    radius: RadiusParams
    a: float
    sigma_x: tuple[float, ...]
    K_F: int
    n_groups: int


def policy_step(kind: PolicyKind, round_n: int, candidates, posteriors, params: StepParams,
                eta=None) -> Decision:
    """Dispatch one post-warm-start round to its decision rule.

    Two-stage rules need the interview signals ``eta`` of all candidates;
    only the finalists' values are read.
    """
    if kind.kind in ("LF", "WarmStartLF"):
        return choose_lf(candidates, posteriors)
    if kind.kind == "UCB":
        return choose_ucb(candidates, posteriors, params.radius)
    if kind.kind == "Hybrid":
        a = params.a if kind.a is None else kind.a
        return choose_hybrid(candidates, posteriors, params.radius, a, params.sigma_x)
    if eta is None:
        raise ValueError("two-stage rules need interview signals")
    if kind.kind == "LF2S":
        mode = "lf2s"
    elif kind.kind == "Rooney":
        mode = "rooney"
    else:
        mode = "rooney" if round_n <= kind.switch_round else "lf2s"
    pool = as_pool(candidates)
    q_hat = estimates(pool, posteriors)
    if mode == "lf2s":
        fin = top_k(q_hat, params.K_F)
    else:
        fin = top_k_each_group(q_hat, pool.group, params.K_F, params.n_groups)
    chosen = hire_from_finalists(fin, q_hat, eta)
    return Decision(chosen, q_hat, np.zeros_like(q_hat), q_hat, finalists=fin, rule_tag=mode)
