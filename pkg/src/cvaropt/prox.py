"""Proximal kernels.

Two layers:

  * truncated_prox: the closed-form proximal point of
        x -> max{c + <a, x - center>, 0} + ||x - center||^2 / (2*lam)
  * the one-step prox-linear updates for the CVaR model, with either a single
    regularizer (spl_step) or separate theta/alpha regularizers
    (spl_plus_step), plus an explicit three-branch variant used to cross-check
    the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .objective import beta_value


@dataclass(frozen=True)
class TruncatedAffineModel:
    """max{c + <a, x - center>, 0} plus a (1/2lam)-quadratic around center."""

    c: float
    a: np.ndarray
    center: np.ndarray
    lam: float

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=np.float64)
        center = np.ascontiguousarray(self.center, dtype=np.float64)
        if a.shape != center.shape or a.ndim != 1:
            raise ValueError("a and center must be 1-d vectors of equal length")
        if not (np.isfinite(a).all() and np.isfinite(center).all() and math.isfinite(self.c)):
            raise ValueError("non-finite model coefficients")
        if not (self.lam > 0.0 and math.isfinite(self.lam)):
            raise ValueError("lam must be a positive real")
        if float(a @ a) == 0.0 and self.c > 0.0:
            raise ValueError("zero slope with positive offset: prox step undefined")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "lam", float(self.lam))


def truncated_prox(m: TruncatedAffineModel) -> np.ndarray:
    """center - min{lam, max(c, 0)/||a||^2} * a  (center itself when a = 0)."""
    norm_sq = float(m.a @ m.a)
    if norm_sq == 0.0:
        return m.center.copy()
    step = min(m.lam, max(m.c, 0.0) / norm_sq)
    return m.center - step * m.a


class Branch(Enum):
    ALPHA_TOO_BIG = "alpha-too-big"
    ALPHA_TOO_SMALL = "alpha-too-small"
    MIDDLE = "middle"


@dataclass(frozen=True)
class SplPlusStepInput:
    """Everything one prox-linear step needs at the sampled point."""

    theta_t: np.ndarray
    alpha_t: float
    loss_t: float
    v_t: np.ndarray
    beta: float
    lambda_theta: float
    lambda_alpha: float

    def __post_init__(self):
        theta = np.ascontiguousarray(self.theta_t, dtype=np.float64)
        v = np.ascontiguousarray(self.v_t, dtype=np.float64)
        if theta.shape != v.shape or theta.ndim != 1:
            raise ValueError("theta_t and v_t must be 1-d vectors of equal length")
        if not (np.isfinite(theta).all() and np.isfinite(v).all()):
            raise ValueError("non-finite step inputs")
        if not (math.isfinite(self.alpha_t) and math.isfinite(self.loss_t)):
            raise ValueError("non-finite step inputs")
        if not (self.lambda_theta > 0.0 and self.lambda_alpha > 0.0):
            raise ValueError("regularization parameters must be positive")
        beta_value(self.beta)
        object.__setattr__(self, "theta_t", theta)
        object.__setattr__(self, "v_t", v)


def clipped_multiplier(
    loss_t: float,
    alpha_t: float,
    v_norm_sq: float,
    beta: float,
    lambda_theta: float,
    lambda_alpha: float,
) -> float:
    """min{1/(1-beta), gamma} with gamma = max(loss - alpha + lam_a, 0) / (lam_t*||v||^2 + lam_a).

    Well-defined for ||v|| = 0 as long as lambda_alpha > 0.
    """
    denom = lambda_theta * v_norm_sq + lambda_alpha
    gamma = max(loss_t - alpha_t + lambda_alpha, 0.0) / denom
    return min(1.0 / (1.0 - beta), gamma)


def spl_plus_step(inp: SplPlusStepInput) -> tuple[np.ndarray, float]:
    """Exact minimizer of the separately regularized prox-linear subproblem."""
    b = beta_value(inp.beta)
    m = clipped_multiplier(
        inp.loss_t,
        inp.alpha_t,
        float(inp.v_t @ inp.v_t),
        b,
        inp.lambda_theta,
        inp.lambda_alpha,
    )
    theta_next = inp.theta_t - (inp.lambda_theta * m) * inp.v_t
    alpha_next = inp.alpha_t - inp.lambda_alpha + inp.lambda_alpha * m
    return theta_next, alpha_next


def spl_plus_step_branched(inp: SplPlusStepInput) -> tuple[np.ndarray, float, Branch]:
    """Same update written as three explicit branches.

    Branch conditions (boundary equalities route to MIDDLE, where all three
    formulas coincide, keeping the label deterministic):
      big:    alpha > loss + lam_a
      small:  alpha < loss - lam_t*||v||^2/(1-beta) - lam_a*beta/(1-beta)
      middle: otherwise, with nu = (loss + lam_a - alpha) / (lam_t*||v||^2 + lam_a)
    """
    b = beta_value(inp.beta)
    v_norm_sq = float(inp.v_t @ inp.v_t)
    lt, la = inp.lambda_theta, inp.lambda_alpha
    if inp.alpha_t > inp.loss_t + la:
        return inp.theta_t.copy(), inp.alpha_t - la, Branch.ALPHA_TOO_BIG
    if inp.alpha_t < inp.loss_t - lt * v_norm_sq / (1.0 - b) - la * b / (1.0 - b):
        theta_next = inp.theta_t - (lt / (1.0 - b)) * inp.v_t
        alpha_next = inp.alpha_t + la * b / (1.0 - b)
        return theta_next, alpha_next, Branch.ALPHA_TOO_SMALL
    nu = (inp.loss_t + la - inp.alpha_t) / (lt * v_norm_sq + la)
    theta_next = inp.theta_t - lt * nu * inp.v_t
    alpha_next = inp.alpha_t - la + la * nu
    return theta_next, alpha_next, Branch.MIDDLE


def spl_step(
    theta_t: np.ndarray,
    alpha_t: float,
    loss_t: float,
    v_t: np.ndarray,
    beta: float,
    lam: float,
) -> tuple[np.ndarray, float]:
    """Plain prox-linear step: one regularizer for both blocks."""
    return spl_plus_step(
        SplPlusStepInput(
            theta_t=theta_t,
            alpha_t=alpha_t,
            loss_t=loss_t,
            v_t=v_t,
            beta=beta,
            lambda_theta=lam,
            lambda_alpha=lam,
        )
    )


def subproblem_objective(
    theta: np.ndarray,
    alpha: float,
    inp: SplPlusStepInput,
) -> float:
    """The regularized model value the step minimizes (used by descent checks)."""
    b = beta_value(inp.beta)
    lin = inp.loss_t + float(inp.v_t @ (theta - inp.theta_t)) - alpha
    reg_t = float((theta - inp.theta_t) @ (theta - inp.theta_t)) / (2.0 * inp.lambda_theta)
    reg_a = (alpha - inp.alpha_t) ** 2 / (2.0 * inp.lambda_alpha)
    return alpha + max(lin, 0.0) / (1.0 - b) + reg_t + reg_a
