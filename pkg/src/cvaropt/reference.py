"""Deterministic full-batch baseline producing (theta*, alpha*, F*).

The scheme alternates an exact inner minimization in alpha (the discrete
quantile) with a full-batch subgradient step in theta sized by a Polyak rule
against the best objective seen so far, minus a margin delta. The margin
starts at the initial objective (a valid gap bound: the loss families are
nonnegative, so F* >= 0) and halves whenever a 50-step window fails to
improve the best value by at least delta/10, the standard unknown-optimum
Polyak variant. There is no randomness and no line search; the best iterate
is tracked and returned. F* from this solver is used as the lower envelope
for every stochastic trace in the benchmark suite.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .model import Dataset, LossModel, loss_values, subgradient_scales
from .objective import beta_value, objective_from_losses, var_from_losses

_WINDOW = 50


@dataclass
class ReferenceSolution:
    theta_star: np.ndarray
    alpha_star: float
    f_star: float
    iterations: int
    stationarity: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["theta_star"] = [float(v) for v in self.theta_star]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReferenceSolution":
        return cls(
            theta_star=np.asarray(d["theta_star"], dtype=np.float64),
            alpha_star=float(d["alpha_star"]),
            f_star=float(d["f_star"]),
            iterations=int(d["iterations"]),
            stationarity=float(d["stationarity"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ReferenceSolution":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _batch_subgradient(
    model: LossModel,
    theta: np.ndarray,
    data: Dataset,
    losses: np.ndarray,
    alpha: float,
    beta: float,
) -> np.ndarray:
    """(1/(n(1-beta))) * sum over {loss_i > alpha} of the per-sample subgradient.

    Ties (loss_i == alpha) are excluded, consistent with the sampled
    subgradient's u-tie rule.
    """
    active = losses > alpha
    if not active.any():
        return np.zeros(data.d)
    weights = np.where(active, subgradient_scales(model, theta, data), 0.0)
    g = data.X.T @ weights
    return np.asarray(g).ravel() / (data.n * (1.0 - beta))


def solve_reference(
    data: Dataset,
    model: LossModel,
    beta: float,
    theta0: np.ndarray,
    max_iters: int = 100_000,
    tol: float = 1e-10,
) -> ReferenceSolution:
    """Minimize the empirical CVaR objective jointly over (theta, alpha).

    Terminates when the best objective improves by less than ``tol`` (relative)
    over a 50-step window, when a zero subgradient is hit, or at ``max_iters``.
    """
    b = beta_value(beta)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    theta = np.asarray(theta0, dtype=np.float64).copy()
    if theta.shape != (data.d,):
        raise ValueError(f"theta0 must have shape ({data.d},)")

    best_f = math.inf
    best_theta = theta.copy()
    window_anchor = math.inf
    stationarity = math.inf
    delta = None
    iterations = 0

    for k in range(1, max_iters + 1):
        iterations = k
        losses = loss_values(model, theta, data)
        alpha = var_from_losses(losses, b)
        f = objective_from_losses(losses, alpha, b)
        if not math.isfinite(f):
            raise ValueError("reference solve produced a non-finite objective")
        if f < best_f:
            best_f = f
            best_theta = theta.copy()
        if delta is None:
            delta = f if f > 0.0 else 1.0
        if k == 1:
            window_anchor = best_f

        if k % _WINDOW == 0:
            improvement = window_anchor - best_f
            stationarity = improvement
            if improvement < delta / 10.0:
                delta *= 0.5
            stall = tol * max(1.0, abs(best_f))
            if delta < stall and improvement < stall:
                break
            window_anchor = best_f

        g = _batch_subgradient(model, theta, data, losses, alpha, b)
        g_norm_sq = float(g @ g)
        if g_norm_sq == 0.0:
            stationarity = 0.0
            break
        theta = theta - ((f - (best_f - delta)) / g_norm_sq) * g

    losses = loss_values(model, best_theta, data)
    alpha_star = var_from_losses(losses, b)
    f_star = objective_from_losses(losses, alpha_star, b)
    return ReferenceSolution(
        theta_star=best_theta,
        alpha_star=alpha_star,
        f_star=f_star,
        iterations=iterations,
        stationarity=stationarity if math.isfinite(stationarity) else 0.0,
    )
