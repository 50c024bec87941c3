"""Sensitivity-sweep harness: lambda grids, multi-seed runs, suboptimality and
iterations-to-epsilon metrics, CSV/JSON persistence.

Protocol per cell (method, lambda, seed): draw the initial iterate from the
seed (theta0 standard normal, alpha0 uniform on [0,1)), run the solver on the
problem dataset for the configured horizon, and evaluate the averaged iterate
against the reference optimum F*. Diverged cells record a capped
suboptimality (cap_factor * initial gap) so sensitivity curves stay plottable
across the full grid. Cells are independent; execution order never changes
values, and outputs are written in deterministic (method, lambda, seed) order.

Wall-clock timings are reported in manifest.json only: the CSV outputs are
byte-reproducible for identical inputs, which timing data would break.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent import futures
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .data import SyntheticSpec, read_libsvm, to_dataset
from .model import Dataset, Iterate, LossModel
from .objective import beta_value, empirical_objective
from .optim import Method, Schedule, ScheduleKind, SolverConfig, SplPlusScaling, run
from .reference import ReferenceSolution
from .rng import Stream, derive

_ROLE_INIT = 21

DEFAULT_BETA = 0.95
DEFAULT_CAP_FACTOR = 1e6
_GAP_FLOOR = 1e-300


def base_lambda_grid() -> tuple[float, ...]:
    """11 decades, 1e-6 .. 1e4."""
    return tuple(10.0**e for e in range(-6, 5))


def default_lambda_grid() -> tuple[float, ...]:
    """The base grid densified around lambda = 1 (15 points)."""
    dense = [10.0**e for e in (-1.5, -0.5, 0.5, 1.5)]
    return tuple(sorted(list(base_lambda_grid()) + dense))


@dataclass(frozen=True)
class SweepSpec:
    problem: SyntheticSpec | str
    lambda_grid: tuple[float, ...]
    seeds: tuple[int, ...]
    methods: tuple[Method, ...] = (Method.SGM, Method.SPL, Method.SPL_PLUS)
    epsilon_targets: tuple[float, ...] = ()
    beta: float = DEFAULT_BETA
    horizon: int = 20_000
    record_every: int = 200
    schedule_kind: ScheduleKind = ScheduleKind.SQRT_DECAY
    scaling: SplPlusScaling = field(default_factory=SplPlusScaling)
    loss: LossModel | None = None
    binary_labels: bool = False
    cap_factor: float = DEFAULT_CAP_FACTOR

    def __post_init__(self):
        grid = tuple(float(v) for v in self.lambda_grid)
        if not grid:
            raise ValueError("lambda grid must be nonempty")
        if any(v <= 0.0 for v in grid):
            raise ValueError("lambda grid entries must be positive")
        if list(grid) != sorted(grid):
            raise ValueError("lambda grid must be sorted ascending")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if any(e <= 0.0 for e in self.epsilon_targets):
            raise ValueError("epsilon targets must be positive")
        beta_value(self.beta)
        object.__setattr__(self, "lambda_grid", grid)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "epsilon_targets", tuple(float(e) for e in self.epsilon_targets))

    def resolve_loss(self) -> LossModel:
        if isinstance(self.problem, SyntheticSpec):
            return self.problem.loss
        if self.loss is None:
            raise ValueError("a loss model is required when the problem is a dataset path")
        return self.loss


def load_problem(spec: SweepSpec) -> tuple[Dataset, LossModel]:
    from .data import synthetic_problem

    if isinstance(spec.problem, SyntheticSpec):
        return synthetic_problem(spec.problem)[0], spec.problem.loss
    loss = spec.resolve_loss()
    sp = read_libsvm(spec.problem, binary_labels=spec.binary_labels)
    data = to_dataset(sp)
    if loss is LossModel.LOGISTIC:
        data.require_binary_labels()
    return data, loss


def initial_iterate(seed: int, d: int) -> Iterate:
    """theta0 ~ N(0, I_d), alpha0 ~ U(0, 1), from the seed's init stream."""
    stream = Stream(derive(seed, _ROLE_INIT))
    theta0 = stream.normal(d)
    alpha0 = float(stream.uniform(1)[0])
    return Iterate(theta=theta0, alpha=alpha0)


def iterations_to_epsilon(
    trace: list[tuple[int, float]], f_star: float, epsilon: float
) -> int | None:
    """First recorded iteration with objective - f_star <= epsilon (cadence
    granularity); None means the target was never reached."""
    if not trace:
        raise ValueError("trace is empty")
    for k, f in trace:
        if f - f_star <= epsilon:
            return k
    return None


@dataclass
class CellResult:
    method: Method
    lam: float
    seed: int
    final_subopt: float
    rel_subopt: float
    initial_gap: float
    diverged: bool
    iters_to_eps: dict[float, int | None]
    trace: list[tuple[int, float]]
    wall_seconds: float


@dataclass
class AggregateRow:
    method: Method
    lam: float
    n_seeds: int
    n_diverged: int
    subopt_median: float
    subopt_min: float
    subopt_max: float
    rel_median: float
    rel_min: float
    rel_max: float


@dataclass
class SweepResult:
    spec: SweepSpec
    f_star: float
    cells: list[CellResult]
    aggregates: list[AggregateRow]
    wall_seconds: float

    def cell(self, method: Method, lam: float, seed: int) -> CellResult:
        for c in self.cells:
            if c.method is method and c.lam == lam and c.seed == seed:
                return c
        raise KeyError((method, lam, seed))

    def basin(self, method: Method, rel_eps: float) -> set[float]:
        """Step sizes whose median relative suboptimality meets rel_eps."""
        return {a.lam for a in self.aggregates if a.method is method and a.rel_median <= rel_eps}


def _check_reference(reference: ReferenceSolution, data: Dataset, model: LossModel, beta: float) -> None:
    if reference.theta_star.shape != (data.d,):
        raise ValueError(
            f"reference/problem mismatch: theta* has dimension {reference.theta_star.shape[0]}, problem has {data.d}"
        )
    f = empirical_objective(reference.theta_star, reference.alpha_star, beta, data, model)
    if abs(f - reference.f_star) > 1e-9 * max(1.0, abs(reference.f_star)):
        raise ValueError(
            f"reference/problem mismatch: stored F* = {reference.f_star!r} but re-evaluation gives {f!r}"
        )


def _execute_cell(
    spec: SweepSpec,
    data: Dataset,
    model: LossModel,
    f_star: float,
    method: Method,
    lam: float,
    seed: int,
) -> CellResult:
    init = initial_iterate(seed, data.d)
    f0 = empirical_objective(init.theta, init.alpha, spec.beta, data, model)
    gap0 = max(f0 - f_star, _GAP_FLOOR)
    config = SolverConfig(
        method=method,
        beta=spec.beta,
        schedule=Schedule(kind=spec.schedule_kind, base_lambda=lam),
        horizon=spec.horizon,
        seed=seed,
        record_every=spec.record_every,
        scaling=spec.scaling,
    )
    rec = run(config, data, model, init)
    if rec.diverged or not rec.trace:
        subopt = spec.cap_factor * gap0
        diverged = True
    else:
        subopt = rec.trace[-1][1] - f_star
        diverged = False
    iters = {
        eps: (iterations_to_epsilon(rec.trace, f_star, eps) if rec.trace else None)
        for eps in spec.epsilon_targets
    }
    return CellResult(
        method=method,
        lam=lam,
        seed=seed,
        final_subopt=subopt,
        rel_subopt=subopt / gap0,
        initial_gap=gap0,
        diverged=diverged,
        iters_to_eps=iters,
        trace=rec.trace,
        wall_seconds=rec.wall_seconds,
    )


_POOL_STATE: dict = {}


def _pool_init(spec: SweepSpec, f_star: float) -> None:
    data, model = load_problem(spec)
    _POOL_STATE["args"] = (spec, data, model, f_star)


def _pool_cell(cell: tuple[Method, float, int]) -> CellResult:
    spec, data, model, f_star = _POOL_STATE["args"]
    return _execute_cell(spec, data, model, f_star, *cell)


def run_sweep(spec: SweepSpec, reference: ReferenceSolution, jobs: int = 1) -> SweepResult:
    t0 = time.perf_counter()
    data, model = load_problem(spec)
    _check_reference(reference, data, model, spec.beta)
    f_star = reference.f_star

    cells_todo = [
        (method, lam, seed)
        for method in spec.methods
        for lam in spec.lambda_grid
        for seed in spec.seeds
    ]
    if jobs > 1:
        with futures.ProcessPoolExecutor(
            max_workers=jobs, initializer=_pool_init, initargs=(spec, f_star)
        ) as pool:
            cells = list(pool.map(_pool_cell, cells_todo))
    else:
        cells = [_execute_cell(spec, data, model, f_star, *c) for c in cells_todo]

    aggregates = []
    for method in spec.methods:
        for lam in spec.lambda_grid:
            group = [c for c in cells if c.method is method and c.lam == lam]
            sub = np.array([c.final_subopt for c in group])
            rel = np.array([c.rel_subopt for c in group])
            aggregates.append(
                AggregateRow(
                    method=method,
                    lam=lam,
                    n_seeds=len(group),
                    n_diverged=sum(c.diverged for c in group),
                    subopt_median=float(np.median(sub)),
                    subopt_min=float(sub.min()),
                    subopt_max=float(sub.max()),
                    rel_median=float(np.median(rel)),
                    rel_min=float(rel.min()),
                    rel_max=float(rel.max()),
                )
            )
    return SweepResult(
        spec=spec,
        f_star=f_star,
        cells=cells,
        aggregates=aggregates,
        wall_seconds=time.perf_counter() - t0,
    )


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _eps_column(eps: float) -> str:
    return f"iters_to_eps@{eps!r}"


def cells_header(epsilon_targets: tuple[float, ...]) -> list[str]:
    return [
        "method",
        "lambda",
        "seed",
        "final_subopt",
        "rel_subopt",
        "initial_gap",
        "diverged",
    ] + [_eps_column(e) for e in epsilon_targets]


AGGREGATE_HEADER = [
    "method",
    "lambda",
    "n_seeds",
    "n_diverged",
    "subopt_median",
    "subopt_min",
    "subopt_max",
    "rel_subopt_median",
    "rel_subopt_min",
    "rel_subopt_max",
]


def _spec_jsonable(spec: SweepSpec) -> dict:
    if isinstance(spec.problem, SyntheticSpec):
        problem = {
            "type": "synthetic",
            "task": spec.problem.task.value,
            "noise": {
                "kind": spec.problem.noise.kind.value,
                "mu": spec.problem.noise.mu,
                "scale": spec.problem.noise.scale,
            },
            "d": spec.problem.d,
            "n": spec.problem.n,
            "seed": spec.problem.seed,
        }
    else:
        problem = {"type": "file", "path": str(spec.problem), "binary_labels": spec.binary_labels}
    return {
        "problem": problem,
        "lambda_grid": list(spec.lambda_grid),
        "seeds": list(spec.seeds),
        "methods": [m.value for m in spec.methods],
        "epsilon_targets": list(spec.epsilon_targets),
        "beta": spec.beta,
        "horizon": spec.horizon,
        "record_every": spec.record_every,
        "schedule_kind": spec.schedule_kind.value,
        "scaling": spec.scaling.kind.value,
        "loss": spec.loss.value if spec.loss is not None else None,
        "cap_factor": spec.cap_factor,
    }


def _reference_hash(reference: ReferenceSolution) -> str:
    blob = json.dumps(reference.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def emit_results(
    result: SweepResult,
    out_dir,
    reference: ReferenceSolution | None = None,
    write_traces: bool = False,
) -> dict[str, Path]:
    """Write cells.csv, aggregate.csv, manifest.json (and optional per-cell
    trace CSVs). CSV values use repr() for full round-trip precision; the CSVs
    carry no timing data and are byte-identical across repeated runs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eps = result.spec.epsilon_targets

    cells_path = out / "cells.csv"
    with open(cells_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(cells_header(eps))
        for c in result.cells:
            row = [
                c.method.value,
                _fmt(c.lam),
                c.seed,
                _fmt(c.final_subopt),
                _fmt(c.rel_subopt),
                _fmt(c.initial_gap),
                int(c.diverged),
            ]
            row += ["" if c.iters_to_eps[e] is None else c.iters_to_eps[e] for e in eps]
            w.writerow(row)

    agg_path = out / "aggregate.csv"
    with open(agg_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(AGGREGATE_HEADER)
        for a in result.aggregates:
            w.writerow(
                [
                    a.method.value,
                    _fmt(a.lam),
                    a.n_seeds,
                    a.n_diverged,
                    _fmt(a.subopt_median),
                    _fmt(a.subopt_min),
                    _fmt(a.subopt_max),
                    _fmt(a.rel_median),
                    _fmt(a.rel_min),
                    _fmt(a.rel_max),
                ]
            )

    paths = {"cells": cells_path, "aggregate": agg_path}

    if write_traces:
        for c in result.cells:
            tp = out / f"trace_{c.method.value}_{c.lam!r}_{c.seed}.csv"
            write_trace_csv(c.trace, tp)
            paths[f"trace_{c.method.value}_{c.lam!r}_{c.seed}"] = tp

    manifest = {
        "spec": _spec_jsonable(result.spec),
        "f_star": result.f_star,
        "reference_hash": _reference_hash(reference) if reference is not None else None,
        "code_version": __version__,
        "columns": {"cells": cells_header(eps), "aggregate": AGGREGATE_HEADER},
        "wall_seconds_total": result.wall_seconds,
        "wall_seconds_cells": [
            {"method": c.method.value, "lambda": c.lam, "seed": c.seed, "wall_seconds": c.wall_seconds}
            for c in result.cells
        ],
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    paths["manifest"] = manifest_path
    return paths


def write_trace_csv(trace: list[tuple[int, float]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["iteration", "averaged_objective"])
        for k, f in trace:
            w.writerow([k, _fmt(f)])


def read_cells_csv(path) -> list[dict]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def read_aggregate_csv(path) -> list[dict]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
