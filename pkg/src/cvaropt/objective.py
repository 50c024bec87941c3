"""The variational CVaR objective, exact discrete VaR/CVaR, and the sampled
subgradient used by the stochastic subgradient method.

Conventions for a discrete (empirical) distribution of losses l_1..l_n:
  * F(theta, alpha) = alpha + mean(max(l_i - alpha, 0)) / (1 - beta)
  * VaR_beta = the smallest loss value whose rank k satisfies k/n >= beta
    (rank comparison, not ceil(n*beta), so the implementation agrees bit-for-bit
    with a linear scan over candidate alphas at the same float beta)
  * CVaR_beta = min over alpha of F(theta, alpha) = F(theta, VaR_beta); valid
    because F is piecewise-linear convex in alpha with a kink at every loss and
    a minimizer at the beta-quantile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Dataset, LossModel, Sample, loss_subgradient, loss_value, loss_values


@dataclass(frozen=True)
class CvarLevel:
    """Confidence level beta in [0, 1)."""

    beta: float

    def __post_init__(self):
        b = float(self.beta)
        if not (0.0 <= b < 1.0) or not math.isfinite(b):
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        object.__setattr__(self, "beta", b)

    @property
    def tail_weight(self) -> float:
        return 1.0 / (1.0 - self.beta)


def beta_value(beta: "CvarLevel | float") -> float:
    if isinstance(beta, CvarLevel):
        return beta.beta
    return CvarLevel(float(beta)).beta


@dataclass(frozen=True)
class ObjectiveValue:
    """An evaluated objective together with the alpha it was evaluated at."""

    value: float
    alpha_used: float


def objective_from_losses(losses: np.ndarray, alpha: float, beta) -> float:
    b = beta_value(beta)
    if not np.isfinite(losses).all():
        raise ValueError("loss vector contains non-finite entries")
    excess = np.maximum(losses - alpha, 0.0)
    return float(alpha + excess.mean() / (1.0 - b))


def var_from_losses(losses: np.ndarray, beta) -> float:
    b = beta_value(beta)
    srt = np.sort(np.asarray(losses, dtype=np.float64))
    n = srt.shape[0]
    ranks = np.arange(1, n + 1, dtype=np.float64) / n
    # first rank with coverage >= beta; beta < 1 guarantees a hit at k = n
    return float(srt[int(np.argmax(ranks >= b))])


def cvar_from_losses(losses: np.ndarray, beta) -> float:
    return objective_from_losses(losses, var_from_losses(losses, beta), beta)


def empirical_objective(
    theta: np.ndarray, alpha: float, beta, data: Dataset, model: LossModel
) -> float:
    """F(theta, alpha) = alpha + mean(max(loss - alpha, 0)) / (1 - beta)."""
    return objective_from_losses(loss_values(model, theta, data), alpha, beta)


def exact_var(theta: np.ndarray, beta, data: Dataset, model: LossModel) -> float:
    """Discrete Value-at-Risk: the ceil(n*beta)-th smallest loss (rank scan)."""
    return var_from_losses(loss_values(model, theta, data), beta)


def exact_cvar(theta: np.ndarray, beta, data: Dataset, model: LossModel) -> float:
    """min over alpha of F(theta, alpha), via the closed-form alpha = VaR."""
    losses = loss_values(model, theta, data)
    return objective_from_losses(losses, var_from_losses(losses, beta), beta)


def evaluate_cvar(theta: np.ndarray, beta, data: Dataset, model: LossModel) -> ObjectiveValue:
    losses = loss_values(model, theta, data)
    a = var_from_losses(losses, beta)
    return ObjectiveValue(value=objective_from_losses(losses, a, beta), alpha_used=a)


def sampled_subgradient(
    theta: np.ndarray, alpha: float, beta, z: Sample, model: LossModel
) -> tuple[np.ndarray, float]:
    """One stochastic subgradient of F(., .; z) at (theta, alpha).

    u = 1 when loss - alpha > 0, u = 0 when loss - alpha <= 0; the tie goes to
    the inactive branch, matching the subgradient method's "alpha big enough"
    test so both code paths pick the same subdifferential element.
    """
    b = beta_value(beta)
    ell = loss_value(model, theta, z)
    if ell - alpha > 0.0:
        w = 1.0 / (1.0 - b)
        return w * loss_subgradient(model, theta, z), 1.0 - w
    return np.zeros(np.asarray(theta).shape[0]), 1.0
