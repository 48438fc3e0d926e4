"""Regret, subsidy and underestimation metrics; cross-run aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hiresim.policies import top_k, top_k_each_group


@dataclass
class RunTrace:
    """Time series of one replication over the post-warm-start rounds.

    Row ``t`` of every per-round array is round ``n0 + 1 + t``.  Two-stage
    regret arrays are ``None`` for one-stage policies.
    """

    n0: int
    N: int
    regret_inc: np.ndarray
    subsidy_paid: np.ndarray
    index_paid: np.ndarray
    cs_paid: np.ndarray
    chosen_group: np.ndarray
    min_eig: np.ndarray  # (M, G), after the round's update
    radius: np.ndarray  # (M, G), after the round's update
    hires: np.ndarray  # (M, G), cumulative including initial sampling
    covered: np.ndarray  # (G,) confidence bound held after every update
    implements_failures: int = 0
    initial_cost: float = 0.0
    u2s_inc: np.ndarray | None = None
    c2s_inc: np.ndarray | None = None

    def __post_init__(self):
        M = self.N - self.n0
        if len(self.regret_inc) != M:
            raise ValueError(f"trace length {len(self.regret_inc)} != N - n0 = {M}")

    @property
    def rounds(self) -> np.ndarray:
        return np.arange(self.n0 + 1, self.N + 1)

    @property
    def cum_regret(self) -> np.ndarray:
        return np.cumsum(self.regret_inc)

    @property
    def cum_subsidy(self) -> np.ndarray:
        return np.cumsum(self.subsidy_paid)

    def series(self) -> dict[str, np.ndarray]:
        """Cumulative series keyed by name."""
        out = {
            "regret": np.cumsum(self.regret_inc),
            "subsidy": np.cumsum(self.subsidy_paid),
            "index_subsidy": np.cumsum(self.index_paid),
            "cost_saving_subsidy": np.cumsum(self.cs_paid),
        }
        if self.u2s_inc is not None:
            out["u2s_regret"] = np.cumsum(self.u2s_inc)
            out["c2s_regret"] = np.cumsum(self.c2s_inc)
        return out

    def equals(self, other: "RunTrace") -> bool:
        """Bitwise equality of every field."""
        for k, v in self.__dict__.items():
            w = other.__dict__[k]
            if isinstance(v, np.ndarray) or isinstance(w, np.ndarray):
                if v is None or w is None or v.shape != w.shape or v.tobytes() != w.tobytes():
                    return False
            elif v != w:
                return False
        return True


def _unpack(candidates):
    """True skills, signals and groups from a Candidate list, else ``None``."""
    if len(candidates) and hasattr(candidates[0], "q_true"):
        return (np.array([c.q_true for c in candidates], dtype=float),
                np.array([c.eta for c in candidates], dtype=float),
                np.array([c.group for c in candidates], dtype=int))
    return None


def regret_step(q_true, chosen: int) -> float:
    """``q_true`` is an array of true skills or a list of candidates."""
    c = _unpack(q_true)
    q_true = c[0] if c else np.asarray(q_true, dtype=float)
    return float(np.max(q_true) - q_true[chosen])


def _two_stage_gap(benchmark_set, q_true, eta, chosen) -> float:
    best = max(q_true[i] + eta[i] for i in benchmark_set)
    return float(best - (q_true[chosen] + eta[chosen]))


def u2s_step(q_true, eta, chosen: int, K_F: int) -> float:
    """Gap to the best of the top-``K_F`` candidates by true skill; may be negative.

    ``q_true`` may be a candidate list, in which case ``eta`` is ignored.
    """
    c = _unpack(q_true)
    if c:
        q_true, eta, _ = c
    q_true = np.asarray(q_true, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return _two_stage_gap(top_k(q_true, K_F), q_true, eta, chosen)


def c2s_step(q_true, eta, groups, chosen: int, K_F: int, n_groups: int | None = None) -> float:
    """Gap to the best of the best finalists containing every group."""
    c = _unpack(q_true)
    if c:
        q_true, eta, groups = c
    q_true = np.asarray(q_true, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return _two_stage_gap(top_k_each_group(q_true, groups, K_F, n_groups), q_true, eta, chosen)


def detect_pu(trace: RunTrace, group: int) -> bool:
    """Group never hired after the initial sampling phase."""
    return not bool(np.any(trace.chosen_group == group))


def binomial_halfwidth(p: np.ndarray | float, R: int) -> np.ndarray | float:
    """Two-sigma binomial half-width for a frequency over ``R`` runs."""
    return 2.0 * np.sqrt(p * (1.0 - p) / R)


@dataclass
class SeriesStats:
    mean: np.ndarray
    p5: np.ndarray
    p95: np.ndarray
    std: np.ndarray

    def final_halfwidth(self, R: int) -> float:
        """Two standard errors of the mean at the last round."""
        return float(2.0 * self.std[-1] / np.sqrt(R))


@dataclass
class AggregateStats:
    R: int
    n0: int
    N: int
    series: dict[str, SeriesStats]
    pu_freq: np.ndarray  # (G,)
    pu_ci: np.ndarray  # (G,)
    coverage_freq: float
    implements_failures: int
    initial_cost_mean: float
    finals: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def rounds(self) -> np.ndarray:
        return np.arange(self.n0 + 1, self.N + 1)


def aggregate(traces: list[RunTrace]) -> AggregateStats:
    """Pointwise mean and 5/95 percentiles of the cumulative series, and
    perpetual-underestimation frequencies with two-sigma binomial CIs."""
    if not traces:
        raise ValueError("need at least one trace")
    first = traces[0]
    for t in traces[1:]:
        if (t.n0, t.N) != (first.n0, first.N):
            raise ValueError("traces have mismatched lengths")
    R = len(traces)
    stacked: dict[str, np.ndarray] = {}
    for t in traces:
        for k, v in t.series().items():
            stacked.setdefault(k, []).append(v)
    series = {}
    finals = {}
    for k, rows in stacked.items():
        if len(rows) != R:
            raise ValueError(f"series {k!r} missing from some traces")
        m = np.vstack(rows)
        p5, p95 = np.percentile(m, [5, 95], axis=0)
        std = m.std(axis=0, ddof=1) if R > 1 else np.zeros(m.shape[1])
        series[k] = SeriesStats(m.mean(axis=0), p5, p95, std)
        finals[k] = m[:, -1].copy()
    G = first.hires.shape[1]
    pu = np.array([[detect_pu(t, g) for g in range(G)] for t in traces], dtype=float)
    freq = pu.mean(axis=0)
    covered = np.array([bool(np.all(t.covered)) for t in traces], dtype=float)
    return AggregateStats(
        R=R,
        n0=first.n0,
        N=first.N,
        series=series,
        pu_freq=freq,
        pu_ci=binomial_halfwidth(freq, R),
        coverage_freq=float(covered.mean()),
        implements_failures=int(sum(t.implements_failures for t in traces)),
        initial_cost_mean=float(np.mean([t.initial_cost for t in traces])),
        finals=finals,
    )
