"""Risk-averse empirical risk minimization toolkit.

Variational CVaR objective, exact discrete VaR/CVaR, stochastic solvers
(subgradient and prox-linear with shared or separate regularization), a
deterministic full-batch reference solver, synthetic problem generators, a
LIBSVM parser, and a step-size sensitivity benchmark harness.
"""

__version__ = "0.1.0"

from .model import Dataset, Iterate, LossModel, Sample, loss_subgradient, loss_value
from .objective import (
    CvarLevel,
    ObjectiveValue,
    empirical_objective,
    exact_cvar,
    exact_var,
    sampled_subgradient,
)
from .prox import (
    Branch,
    SplPlusStepInput,
    TruncatedAffineModel,
    spl_plus_step,
    spl_plus_step_branched,
    spl_step,
    truncated_prox,
)
from .optim import (
    Method,
    RateBound,
    RunRecord,
    Schedule,
    ScheduleKind,
    ScalingKind,
    SolverConfig,
    SplPlusScaling,
    rate_bounds,
    run,
    run_erm,
    run_max_loss,
    run_sgm,
    run_spl_plus,
)
from .reference import ReferenceSolution, solve_reference
from .data import (
    LibsvmParseError,
    NoiseKind,
    NoiseSpec,
    SparseDataset,
    SyntheticSpec,
    Task,
    generate_synthetic,
    parse_libsvm,
    read_libsvm,
    to_dataset,
    write_libsvm,
)
from .bench import (
    SweepResult,
    SweepSpec,
    base_lambda_grid,
    default_lambda_grid,
    emit_results,
    initial_iterate,
    iterations_to_epsilon,
    run_sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
