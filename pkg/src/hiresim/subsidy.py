"""Subsidy rules and the implementability check.

A firm hiring candidate i receives ``q_hat_i + s_i``; a subsidy rule
implements a decision rule when the firm's argmax is the rule's choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RULES = ("none", "ucb_index", "hybrid_index", "cost_saving")

# Pairings of decision rule and subsidy rule accepted by the simulator.
VALID_PAIRS = {
    "LF": ("none",),
    "WarmStartLF": ("none",),
    "LF2S": ("none",),
    "Rooney": ("none",),
    "RooneyThenLF": ("none",),
    "UCB": ("ucb_index", "cost_saving"),
    "Hybrid": ("hybrid_index", "cost_saving"),
}


@dataclass
class SubsidyOutcome:
    per_candidate: np.ndarray
    paid: float
    rule_tag: str
    target: int


def _outcome(s: np.ndarray, q_hat: np.ndarray, tag: str, chosen: int | None) -> SubsidyOutcome:
    if chosen is None:
        chosen = int(np.argmax(q_hat + s))
    return SubsidyOutcome(s, float(s[chosen]), tag, chosen)


def no_subsidy(q_hat, chosen: int | None = None) -> SubsidyOutcome:
    q_hat = np.asarray(q_hat, dtype=float)
    return _outcome(np.zeros_like(q_hat), q_hat, "none", chosen)


def ucb_index_subsidy(q_hat, q_tilde, chosen: int | None = None) -> SubsidyOutcome:
    """Pay every candidate the gap between its UCB index and its estimate."""
    q_hat = np.asarray(q_hat, dtype=float)
    q_tilde = np.asarray(q_tilde, dtype=float)
    if np.any(q_tilde < q_hat):
        raise ValueError("UCB index below estimated skill")
    return _outcome(q_tilde - q_hat, q_hat, "ucb_index", chosen)


def hybrid_index_subsidy(q_hat, widths, thresholds, chosen: int | None = None) -> SubsidyOutcome:
    """Pay the UCB gap only to candidates whose width exceeds their threshold."""
    q_hat = np.asarray(q_hat, dtype=float)
    w = np.asarray(widths, dtype=float)
    on = w > np.asarray(thresholds, dtype=float)
    # (q_hat + w) - q_hat rather than w: keeps payment and index consistent in floating point
    s = np.where(on, (q_hat + w) - q_hat, 0.0)
    return _outcome(s, q_hat, "hybrid_index", chosen)


def cost_saving_subsidy(target: int, q_hat) -> SubsidyOutcome:
    """Smallest payment to ``target`` that matches the best estimated skill."""
    q_hat = np.asarray(q_hat, dtype=float)
    if not 0 <= target < len(q_hat):
        raise IndexError(f"target {target} out of range")
    s = np.zeros_like(q_hat)
    s[target] = np.max(q_hat) - q_hat[target]
    return SubsidyOutcome(s, float(s[target]), "cost_saving", target)


def implements_tol(q_hat: np.ndarray, s: np.ndarray) -> float:
    """Tie allowance: a relative 1e-12 of the largest operand of ``q_hat + s``."""
    scale = max(1.0, float(np.max(np.abs(q_hat))), float(np.max(np.abs(s))),
                float(np.max(np.abs(q_hat + s))))
    return 1e-12 * scale


def verify_implements(decision, subsidy: SubsidyOutcome, q_hat) -> bool:
    """True when the decision's choice maximizes ``q_hat + s``.

    Ties, up to a relative 1e-12 of the operands (rounding of ``q_hat + s``),
    resolve toward the subsidized target.
    """
    chosen = decision if isinstance(decision, (int, np.integer)) else decision.chosen
    q_hat = np.asarray(q_hat, dtype=float)
    if len(q_hat) != len(subsidy.per_candidate):
        raise ValueError("length mismatch between estimates and payments")
    payoff = q_hat + subsidy.per_candidate
    return bool(payoff[chosen] >= np.max(payoff) - implements_tol(q_hat, subsidy.per_candidate))
