"""Optimizer drivers: the stochastic subgradient method, the stochastic
prox-linear method (shared and separate regularization), special modes
(max-loss, expected-risk), and rate-bound diagnostics.

A run with horizon T performs update steps t = 0..T (T+1 updates total) and
returns the average of the post-update iterates, the quantity the convergence
bounds are stated for. Identical (config, data, init) inputs reproduce the
trace bit-for-bit: all randomness flows through counter-based streams derived
from the config seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .model import Dataset, Iterate, LossModel, loss_values, row_norms_sq
from .objective import beta_value, objective_from_losses
from .rng import Stream, derive

DIVERGENCE_LIMIT = 1e12

_ROLE_SAMPLING = 1
_ROLE_ELL0 = 2
_ELL0_SUBSAMPLE_THRESHOLD = 1_000_000
_ELL0_SUBSAMPLE_SIZE = 100_000


class Method(Enum):
    SGM = "sgm"
    SPL = "spl"
    SPL_PLUS = "splplus"


class ScheduleKind(Enum):
    SQRT_DECAY = "sqrt-decay"
    CONSTANT_HORIZON = "constant-horizon"


@dataclass(frozen=True)
class Schedule:
    """Step-size sequence: lam/sqrt(t+1) or the horizon-constant lam/sqrt(T+1)."""

    kind: ScheduleKind = ScheduleKind.SQRT_DECAY
    base_lambda: float = 1.0

    def __post_init__(self):
        if not (self.base_lambda > 0.0 and math.isfinite(self.base_lambda)):
            raise ValueError("base_lambda must be a positive real")

    def step_size(self, t: int, horizon: int) -> float:
        if self.kind is ScheduleKind.SQRT_DECAY:
            return self.base_lambda / math.sqrt(t + 1.0)
        return self.base_lambda / math.sqrt(horizon + 1.0)


class ScalingKind(Enum):
    INITIAL_LOSS = "initial-loss"
    LIPSCHITZ_ORACLE = "lipschitz-oracle"
    MANUAL = "manual"


@dataclass(frozen=True)
class SplPlusScaling:
    """How the per-step pair (lambda_theta_t, lambda_alpha_t) is formed.

    initial-loss     : lambda_theta_t = lam_t / ell0, lambda_alpha_t = lam_t * ell0
                       with ell0 the mean loss at the initial iterate (measured
                       from the data when not supplied).
    lipschitz-oracle : lam_t * ||theta_t - theta*|| / L and lam_t * |alpha_t - alpha*|;
                       needs the optimum and an average Lipschitz constant.
    manual           : fixed multipliers on lam_t for each block.
    """

    kind: ScalingKind = ScalingKind.INITIAL_LOSS
    ell0: float | None = None
    theta_multiplier: float = 1.0
    alpha_multiplier: float = 1.0
    lipschitz: float | None = None
    theta_star: np.ndarray | None = None
    alpha_star: float | None = None

    def __post_init__(self):
        if self.ell0 is not None and not self.ell0 > 0.0:
            raise ValueError("ell0 must be positive")
        if self.kind is ScalingKind.MANUAL:
            if not (self.theta_multiplier > 0.0 and self.alpha_multiplier > 0.0):
                raise ValueError("manual multipliers must be positive")
        if self.kind is ScalingKind.LIPSCHITZ_ORACLE:
            if self.lipschitz is None or self.theta_star is None or self.alpha_star is None:
                raise ValueError("lipschitz-oracle scaling needs lipschitz, theta_star and alpha_star")
            if not self.lipschitz > 0.0:
                raise ValueError("lipschitz must be positive")


@dataclass(frozen=True)
class SolverConfig:
    method: Method
    beta: float
    schedule: Schedule
    horizon: int
    seed: int
    record_every: int
    scaling: SplPlusScaling = field(default_factory=SplPlusScaling)

    def __post_init__(self):
        beta_value(self.beta)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class RunRecord:
    """Per-run trace: averaged-iterate objectives at the recording cadence."""

    trace: list[tuple[int, float]]
    final_iterate: Iterate
    final_averaged_iterate: Iterate
    wall_seconds: float
    diverged: bool = False
    extra_name: str | None = None
    extra_trace: list[float] | None = None
    meta: dict = field(default_factory=dict)


def _row_accessors(data: Dataset):
    """(dot, axpy, norms_sq): row kernels for dense or CSR feature storage."""
    norms_sq = row_norms_sq(data)
    if data.is_sparse:
        indptr, indices, vals = data.X.indptr, data.X.indices, data.X.data

        def dot(i: int, theta: np.ndarray) -> float:
            s, e = indptr[i], indptr[i + 1]
            return float(vals[s:e] @ theta[indices[s:e]])

        def axpy(i: int, coef: float, theta: np.ndarray) -> None:
            s, e = indptr[i], indptr[i + 1]
            theta[indices[s:e]] += coef * vals[s:e]

    else:
        X = data.X

        def dot(i: int, theta: np.ndarray) -> float:
            return float(X[i] @ theta)

        def axpy(i: int, coef: float, theta: np.ndarray) -> None:
            theta += coef * X[i]

    return dot, axpy, norms_sq


def _loss_and_scale(model: LossModel, pred: float, y: float) -> tuple[float, float]:
    if model is LossModel.SQUARED:
        r = pred - y
        return 0.5 * r * r, r
    if model is LossModel.ABSOLUTE:
        r = pred - y
        return abs(r), float(np.sign(r))
    m = y * pred
    ell = math.log1p(math.exp(-abs(m))) + max(-m, 0.0)
    if m >= 0.0:
        e = math.exp(-m)
        sig = e / (1.0 + e)
    else:
        sig = 1.0 / (1.0 + math.exp(m))
    return ell, -y * sig


class _Averager:
    """Exact running sums over post-update iterates."""

    def __init__(self, d: int):
        self.sum_theta = np.zeros(d)
        self.sum_alpha = 0.0
        self.count = 0

    def push(self, theta: np.ndarray, alpha: float) -> None:
        self.sum_theta += theta
        self.sum_alpha += alpha
        self.count += 1

    def mean(self) -> tuple[np.ndarray, float]:
        return self.sum_theta / self.count, self.sum_alpha / self.count


def _measure_ell0(
    model: LossModel, data: Dataset, theta0: np.ndarray, seed: int
) -> tuple[float, bool]:
    if data.n > _ELL0_SUBSAMPLE_THRESHOLD:
        idx = Stream(derive(seed, _ROLE_ELL0)).integers(_ELL0_SUBSAMPLE_SIZE, data.n)
        if data.is_sparse:
            sub = Dataset(X=data.X[np.asarray(idx)], y=data.y[np.asarray(idx)])
        else:
            sub = Dataset(X=data.X[idx], y=data.y[idx])
        return float(loss_values(model, theta0, sub).mean()), True
    return float(loss_values(model, theta0, data).mean()), False


def _scaling_pair(
    scaling: SplPlusScaling,
    lam_t: float,
    theta: np.ndarray,
    alpha: float,
    ell0: float,
) -> tuple[float, float]:
    if scaling.kind is ScalingKind.INITIAL_LOSS:
        return lam_t / ell0, lam_t * ell0
    if scaling.kind is ScalingKind.MANUAL:
        return lam_t * scaling.theta_multiplier, lam_t * scaling.alpha_multiplier
    dist_t = float(np.linalg.norm(theta - scaling.theta_star))
    dist_a = abs(alpha - scaling.alpha_star)
    floor = 1e-12
    return (
        lam_t * max(dist_t, floor) / scaling.lipschitz,
        lam_t * max(dist_a, floor),
    )


def _run_loop(
    config: SolverConfig,
    data: Dataset,
    model: LossModel,
    init: Iterate,
    extra_metric: Callable[[np.ndarray], float] | None,
    extra_name: str | None,
) -> RunRecord:
    t_start = time.perf_counter()
    b = beta_value(config.beta)
    inv1mb = 1.0 / (1.0 - b)
    T = config.horizon
    n = data.n
    if init.d != data.d:
        raise ValueError(f"init dimension {init.d} does not match data dimension {data.d}")

    dot, axpy, norms_sq = _row_accessors(data)
    y = data.y
    theta = init.theta.copy()
    alpha = init.alpha
    avg = _Averager(data.d)
    idx = Stream(derive(config.seed, _ROLE_SAMPLING)).integers(T + 1, n)

    is_sgm = config.method is Method.SGM
    scaling = config.scaling
    if config.method is Method.SPL:
        scaling = SplPlusScaling(kind=ScalingKind.MANUAL, theta_multiplier=1.0, alpha_multiplier=1.0)
    meta: dict = {"method": config.method.value, "beta": b, "horizon": T, "seed": config.seed}
    ell0 = 1.0
    if not is_sgm and scaling.kind is ScalingKind.INITIAL_LOSS:
        if scaling.ell0 is not None:
            ell0 = float(scaling.ell0)
            meta["ell0"] = ell0
        else:
            ell0, subsampled = _measure_ell0(model, data, theta, config.seed)
            if not ell0 > 0.0:
                raise ValueError(
                    "initial mean loss is not positive; initial-loss scaling is undefined "
                    "(use manual scaling instead)"
                )
            meta["ell0"] = ell0
            meta["ell0_subsampled"] = subsampled

    trace: list[tuple[int, float]] = []
    extra_trace: list[float] | None = [] if extra_metric is not None else None
    diverged = False

    for t in range(T + 1):
        i = int(idx[t])
        pred = dot(i, theta)
        ell, scale = _loss_and_scale(model, pred, y[i])
        lam_t = config.schedule.step_size(t, T)

        if is_sgm:
            # subgradient step with the u = 0 tie rule (alpha >= loss branch)
            if alpha >= ell:
                alpha -= lam_t
            else:
                if scale != 0.0:
                    axpy(i, -lam_t * inv1mb * scale, theta)
                alpha += lam_t * b * inv1mb
        else:
            lt, la = _scaling_pair(scaling, lam_t, theta, alpha, ell0)
            v_norm_sq = scale * scale * float(norms_sq[i])
            gamma = max(ell - alpha + la, 0.0) / (lt * v_norm_sq + la)
            m = gamma if gamma < inv1mb else inv1mb
            if m > 0.0 and scale != 0.0:
                axpy(i, -lt * m * scale, theta)
            alpha += -la + la * m

        avg.push(theta, alpha)
        k = t + 1

        if abs(alpha) > DIVERGENCE_LIMIT or math.sqrt(float(theta @ theta)) > DIVERGENCE_LIMIT:
            diverged = True
            meta["diverged_at"] = k
            break

        if k % config.record_every == 0 or t == T:
            avg_theta, avg_alpha = avg.mean()
            losses = loss_values(model, avg_theta, data)
            f = objective_from_losses(losses, avg_alpha, b)
            if not math.isfinite(f):
                diverged = True
                meta["diverged_at"] = k
                break
            trace.append((k, f))
            if extra_metric is not None:
                extra_trace.append(float(extra_metric(losses)))

    avg_theta, avg_alpha = avg.mean()
    return RunRecord(
        trace=trace,
        final_iterate=Iterate(theta=theta, alpha=alpha),
        final_averaged_iterate=Iterate(theta=avg_theta, alpha=avg_alpha),
        wall_seconds=time.perf_counter() - t_start,
        diverged=diverged,
        extra_name=extra_name,
        extra_trace=extra_trace,
        meta=meta,
    )


def run_sgm(config: SolverConfig, data: Dataset, model: LossModel, init: Iterate, **kw) -> RunRecord:
    if config.method is not Method.SGM:
        raise ValueError("run_sgm requires config.method == Method.SGM")
    return _run_loop(config, data, model, init, kw.get("extra_metric"), kw.get("extra_name"))


def run_spl_plus(config: SolverConfig, data: Dataset, model: LossModel, init: Iterate, **kw) -> RunRecord:
    if config.method not in (Method.SPL, Method.SPL_PLUS):
        raise ValueError("run_spl_plus requires config.method in {SPL, SPL_PLUS}")
    return _run_loop(config, data, model, init, kw.get("extra_metric"), kw.get("extra_name"))


def run(config: SolverConfig, data: Dataset, model: LossModel, init: Iterate, **kw) -> RunRecord:
    """Dispatch on config.method."""
    if config.method is Method.SGM:
        return run_sgm(config, data, model, init, **kw)
    return run_spl_plus(config, data, model, init, **kw)


def run_max_loss(config: SolverConfig, data: Dataset, model: LossModel, init: Iterate) -> RunRecord:
    """CVaR at beta = (n-1)/n, which equals minimizing the maximum training loss."""
    if data.n < 2:
        raise ValueError("max-loss mode needs at least 2 samples")
    cfg = replace(config, beta=(data.n - 1) / data.n)
    rec = run(cfg, data, model, init, extra_metric=np.max, extra_name="max_loss")
    rec.meta["mode"] = "max-loss"
    return rec


def run_erm(config: SolverConfig, data: Dataset, model: LossModel, init: Iterate) -> RunRecord:
    """Truncation-inactive mode (beta = 0): the objective reduces to the mean loss."""
    cfg = replace(config, beta=0.0)
    rec = run(cfg, data, model, init, extra_metric=np.mean, extra_name="mean_loss")
    rec.meta["mode"] = "erm"
    return rec


@dataclass(frozen=True)
class RateBound:
    """Computable pieces of the averaged-iterate convergence bounds.

    m_estimate / m_sq_estimate are empirical surrogates for the per-sample
    Lipschitz moments, measured as subgradient norms at the given iterate
    (the squared loss has no global Lipschitz constant, so these are
    point estimates, not certified constants).
    """

    l_sgm_sq: float
    l_spl_sq: float
    m_estimate: float
    m_sq_estimate: float
    lambda_star_sgm: float | None = None
    lambda_alpha_star: float | None = None
    lambda_theta_star: float | None = None


def rate_bounds(
    data: Dataset,
    model: LossModel,
    init: Iterate,
    beta: float,
    lambda_theta: float,
    lambda_alpha: float,
    theta_star: np.ndarray | None = None,
    alpha_star: float | None = None,
) -> RateBound:
    """Squared rate constants and, when the optimum is supplied, the
    bound-minimizing step-size scalars.

      L_sgm^2  = (E[M^2] + 1) / (1-beta)^2 + 1
      L_spl^2  = ((lambda_theta/lambda_alpha) * E[M^2] + 1) / (1-beta)^2
      lam*_sgm = ||x0 - x*|| / (sqrt(2) * L_sgm)
      lam*_a   = |alpha0 - alpha*| * (1-beta) / sqrt(2)
      lam*_t   = ||theta0 - theta*|| * (1-beta) / (sqrt(2) * E[M])
    """
    from .model import subgradient_scales

    b = beta_value(beta)
    if not (lambda_theta > 0.0 and lambda_alpha > 0.0):
        raise ValueError("regularization parameters must be positive")
    scales = subgradient_scales(model, init.theta, data)
    norms = np.abs(scales) * np.sqrt(row_norms_sq(data))
    m_mean = float(norms.mean())
    m_sq = float((norms * norms).mean())
    one_m_b_sq = (1.0 - b) ** 2
    l_sgm_sq = (m_sq + 1.0) / one_m_b_sq + 1.0
    l_spl_sq = ((lambda_theta / lambda_alpha) * m_sq + 1.0) / one_m_b_sq

    lam_sgm = lam_a = lam_t = None
    if theta_star is not None and alpha_star is not None:
        theta_star = np.asarray(theta_star, dtype=np.float64)
        d_theta = float(np.linalg.norm(init.theta - theta_star))
        d_alpha = abs(init.alpha - float(alpha_star))
        delta = math.sqrt(d_theta**2 + d_alpha**2)
        lam_sgm = delta / (math.sqrt(2.0) * math.sqrt(l_sgm_sq))
        lam_a = d_alpha * (1.0 - b) / math.sqrt(2.0)
        lam_t = d_theta * (1.0 - b) / (math.sqrt(2.0) * m_mean) if m_mean > 0.0 else math.inf

    return RateBound(
        l_sgm_sq=l_sgm_sq,
        l_spl_sq=l_spl_sq,
        m_estimate=m_mean,
        m_sq_estimate=m_sq,
        lambda_star_sgm=lam_sgm,
        lambda_alpha_star=lam_a,
        lambda_theta_star=lam_t,
    )
