"""Per-group sequential ridge regression, confidence radii and UCB indices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

REFRESH_EVERY = 256


@dataclass(frozen=True)
class RadiusParams:
    """Inputs of the confidence radius.

    ``variant`` is one of ``det_based`` (log-determinant radius), ``L_based``
    (radius from the count of observations and the largest context norm) or
    ``bayes`` (Gaussian-prior radius; needs the horizon ``N``).
    """

    sigma_eps: float
    lambda_reg: float
    delta: float
    S_bound: float
    variant: str = "det_based"
    N: int | None = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0,1)")
        if self.lambda_reg <= 0:
            raise ValueError("lambda_reg must be positive")
        if self.sigma_eps < 0 or self.S_bound < 0:
            raise ValueError("sigma_eps and S_bound must be nonnegative")
        if self.variant not in ("det_based", "L_based", "bayes"):
            raise ValueError(f"unknown radius variant {self.variant!r}")
        if self.variant == "bayes" and not self.N:
            raise ValueError("bayes radius needs the horizon N")


class GroupPosterior:
    """Ridge-regression state of one group.

    Keeps the regularized Gram matrix ``V_bar = X'X + lambda I``, the moment
    vector ``b = X'y``, the inverse of ``V_bar`` (rank-one updated, refreshed
    from a Cholesky factorization every ``REFRESH_EVERY`` updates) and
    ``log det V_bar``.
    """

    def __init__(self, d: int, lambda_reg: float):
        if d < 1:
            raise ValueError("d must be at least 1")
        if not lambda_reg > 0:
            raise ValueError("lambda_reg must be positive")
        self.d = d
        self.lambda_reg = float(lambda_reg)
        self.V_bar = lambda_reg * np.eye(d)
        self.V_inv = np.eye(d) / lambda_reg
        self.b = np.zeros(d)
        self.theta_hat = np.zeros(d)
        self.n_obs = 0
        self.max_x_norm = 0.0
        self.logdet = d * math.log(lambda_reg)
        self._since_refresh = 0

    def copy(self) -> "GroupPosterior":
        new = GroupPosterior.__new__(GroupPosterior)
        new.__dict__.update(self.__dict__)
        for k in ("V_bar", "V_inv", "b", "theta_hat"):
            setattr(new, k, getattr(self, k).copy())
        return new

    def update(self, x, y: float) -> "GroupPosterior":
        """Add one observation in place and return ``self``."""
        x = np.asarray(x, dtype=float)
        self.V_bar += np.outer(x, x)
        self.b += y * x
        u = self.V_inv @ x
        s = float(x @ u)
        self.V_inv -= np.outer(u, u) / (1.0 + s)
        self.logdet += math.log1p(s)
        self.n_obs += 1
        self.max_x_norm = max(self.max_x_norm, float(np.sqrt(x @ x)))
        self._since_refresh += 1
        if self._since_refresh >= REFRESH_EVERY:
            self.refresh()
        else:
            self.theta_hat = self.V_inv @ self.b
        return self

    def refresh(self) -> None:
        """Recompute inverse, log-determinant and estimate from ``V_bar``."""
        L = np.linalg.cholesky(self.V_bar)
        Linv = np.linalg.inv(L)
        self.V_inv = Linv.T @ Linv
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
        self.theta_hat = self.V_inv @ self.b
        self._since_refresh = 0

    def predict(self, x) -> float:
        return float(np.dot(x, self.theta_hat))

    def weighted_norm(self, x) -> float:
        """``sqrt(x' V_bar^{-1} x)``."""
        x = np.asarray(x, dtype=float)
        return math.sqrt(max(float(x @ self.V_inv @ x), 0.0))

    def error_norm(self, theta) -> float:
        """``||theta_hat - theta||`` in the ``V_bar`` norm."""
        e = self.theta_hat - np.asarray(theta, dtype=float)
        return math.sqrt(float(e @ self.V_bar @ e))


def posterior_init(d: int, lambda_reg: float) -> GroupPosterior:
    return GroupPosterior(d, lambda_reg)


def posterior_update(p: GroupPosterior, x, y: float) -> GroupPosterior:
    """Return a new posterior with ``(x, y)`` added; ``p`` is left untouched."""
    if not math.isfinite(y):
        raise ValueError("observation must be finite")
    if len(x) != p.d:
        raise ValueError(f"context has length {len(x)}, expected {p.d}")
    return p.copy().update(x, y)


def predict(p: GroupPosterior, x) -> float:
    return p.predict(x)


def conf_radius(p: GroupPosterior, r: RadiusParams) -> float:
    d = p.d
    if r.variant == "det_based":
        # log( det(V)^{1/2} det(lambda I)^{-1/2} / delta )
        arg = 0.5 * (p.logdet - d * math.log(r.lambda_reg)) - math.log(r.delta)
        if not arg > 0:
            raise ArithmeticError("log-determinant below its lower bound")
        return r.sigma_eps * math.sqrt(d * arg) + math.sqrt(r.lambda_reg) * r.S_bound
    if r.variant == "L_based":
        L2 = p.max_x_norm**2
        arg = math.log((1.0 + p.n_obs * L2 / r.lambda_reg) / r.delta)
        return r.sigma_eps * math.sqrt(d * arg) + math.sqrt(r.lambda_reg) * r.S_bound
    ell = math.log(math.pi**2 * r.N**2 / (6.0 * r.delta))
    return r.sigma_eps * math.sqrt(d + ell + 2.0 * math.sqrt(d * ell))


def ucb_width(p: GroupPosterior, x, r: RadiusParams) -> float:
    return conf_radius(p, r) * p.weighted_norm(x)


def ucb_index(p: GroupPosterior, x, r: RadiusParams) -> float:
    """Largest ``x'theta`` over the confidence ellipsoid, in closed form."""
    return p.predict(x) + ucb_width(p, x, r)


def min_eigenvalue(p: GroupPosterior) -> float:
    return float(np.linalg.eigvalsh(p.V_bar)[0])
