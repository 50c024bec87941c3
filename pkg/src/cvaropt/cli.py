"""Command-line front end.

Subcommands: gen-data, reference, solve, sweep, eval. Configuration is
file-first (a JSON document doubles as the experiment's provenance record)
with flag-level overrides. Exit codes: 0 success, 1 usage error, 2 runtime
error. Diagnostics go to stderr; data goes to files or stdout only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bench import SweepSpec, base_lambda_grid, default_lambda_grid, emit_results, initial_iterate, run_sweep, write_trace_csv
from .data import (
    NoiseKind,
    NoiseSpec,
    SyntheticSpec,
    Task,
    from_dataset,
    read_libsvm,
    synthetic_problem,
    to_dataset,
    write_libsvm,
)
from .model import Dataset, Iterate, LossModel
from .objective import empirical_objective, exact_cvar, exact_var
from .optim import Method, Schedule, ScheduleKind, ScalingKind, SolverConfig, SplPlusScaling, run
from .reference import ReferenceSolution, solve_reference


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        raise UsageError(message)


def _formatter(prog):
    return argparse.HelpFormatter(prog, width=96)


# Published config schemas: key -> (expected json types, description).
SWEEP_CONFIG_SCHEMA = {
    "problem": (dict, "problem description (synthetic spec or dataset file)"),
    "lambda_grid": ((list, str), "explicit grid, or 'base' (11 pts) / 'default' (15 pts)"),
    "seeds": (list, "list of integer run seeds"),
    "methods": (list, "subset of ['sgm', 'spl', 'splplus']"),
    "epsilon_targets": (list, "absolute suboptimality targets"),
    "beta": ((int, float), "CVaR confidence level in [0, 1)"),
    "horizon": (int, "iterations per run"),
    "record_every": (int, "evaluation cadence in iterations"),
    "schedule": (str, "'sqrt-decay' or 'constant-horizon'"),
    "scaling": (dict, "prox-linear regularization scaling"),
    "reference": (str, "path to the reference-solution JSON"),
    "out": (str, "output directory"),
    "write_traces": (bool, "also write per-cell trace CSVs"),
    "jobs": (int, "worker processes"),
}

PROBLEM_SCHEMA = {
    "type": (str, "'synthetic' or 'file'"),
    "task": (str, "synthetic task name"),
    "noise": (dict, "noise kind and parameters"),
    "d": (int, "feature dimension"),
    "n": (int, "sample count"),
    "seed": (int, "generation seed"),
    "path": (str, "dataset file (LIBSVM format)"),
    "loss": (str, "loss for file datasets"),
    "binary_labels": (bool, "map {0,1}/{1,2} labels onto {-1,+1}"),
}

SCALING_SCHEMA = {
    "kind": (str, "'initial-loss' or 'manual'"),
    "ell0": ((int, float), "override the measured initial loss"),
    "lambda_theta": ((int, float), "manual multiplier for the parameter block"),
    "lambda_alpha": ((int, float), "manual multiplier for the quantile block"),
}


def _check_keys(obj: dict, schema: dict, where: str) -> None:
    for key, value in obj.items():
        if key not in schema:
            raise UsageError(f"unknown config key {where}{key!r}")
        expected = schema[key][0]
        if not isinstance(value, expected):
            raise UsageError(f"config key {where}{key!r} must be {expected}, got {type(value).__name__}")


def _load_config(path: str | None, schema: dict) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}") from None
    if not isinstance(obj, dict):
        raise UsageError(f"config file {path} must contain a JSON object")
    _check_keys(obj, schema, "")
    return obj


def _noise_from_dict(obj: dict) -> NoiseSpec:
    kind = NoiseKind(obj.get("kind", "normal"))
    base = NoiseSpec.default(kind)
    return NoiseSpec(kind=kind, mu=float(obj.get("mu", base.mu)), scale=float(obj.get("scale", base.scale)))


def _problem_from_dict(obj: dict) -> tuple[SyntheticSpec | str, LossModel | None, bool]:
    _check_keys(obj, PROBLEM_SCHEMA, "problem.")
    ptype = obj.get("type", "synthetic")
    if ptype == "synthetic":
        spec = SyntheticSpec(
            task=Task(obj.get("task", "squared-regression")),
            noise=_noise_from_dict(obj.get("noise", {})),
            d=int(obj.get("d", 10)),
            n=int(obj.get("n", 10_000)),
            seed=int(obj.get("seed", 0)),
        )
        return spec, None, False
    if ptype == "file":
        if "path" not in obj:
            raise UsageError("problem.path is required for file problems")
        loss = LossModel(obj["loss"]) if "loss" in obj else None
        return obj["path"], loss, bool(obj.get("binary_labels", False))
    raise UsageError(f"problem.type must be 'synthetic' or 'file', got {ptype!r}")


def _scaling_from_dict(obj: dict) -> SplPlusScaling:
    _check_keys(obj, SCALING_SCHEMA, "scaling.")
    kind = obj.get("kind", "initial-loss")
    if kind == "initial-loss":
        ell0 = obj.get("ell0")
        return SplPlusScaling(kind=ScalingKind.INITIAL_LOSS, ell0=float(ell0) if ell0 is not None else None)
    if kind == "manual":
        return SplPlusScaling(
            kind=ScalingKind.MANUAL,
            theta_multiplier=float(obj.get("lambda_theta", 1.0)),
            alpha_multiplier=float(obj.get("lambda_alpha", 1.0)),
        )
    raise UsageError(f"scaling.kind must be 'initial-loss' or 'manual', got {kind!r}")


def _grid_from_config(value) -> tuple[float, ...]:
    if value == "base":
        return base_lambda_grid()
    if value == "default":
        return default_lambda_grid()
    if isinstance(value, list):
        return tuple(sorted(float(v) for v in value))
    raise UsageError("lambda_grid must be a list of positives, 'base', or 'default'")


def _load_dataset(path: str, loss: LossModel, binary_labels: bool) -> Dataset:
    data = to_dataset(read_libsvm(path, binary_labels=binary_labels))
    if loss is LossModel.LOGISTIC:
        data.require_binary_labels()
    return data


def _scaling_from_flags(args) -> SplPlusScaling:
    if args.scaling == "manual":
        return SplPlusScaling(
            kind=ScalingKind.MANUAL,
            theta_multiplier=args.lambda_theta,
            alpha_multiplier=args.lambda_alpha,
        )
    return SplPlusScaling(kind=ScalingKind.INITIAL_LOSS)


def build_parser() -> _Parser:
    p = _Parser(prog="cvaropt", description=__doc__.splitlines()[0], formatter_class=_formatter)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")

    g = sub.add_parser("gen-data", help="generate a synthetic dataset file", formatter_class=_formatter)
    g.add_argument("--config", help="SyntheticSpec JSON (problem schema)")
    g.add_argument("--task", choices=[t.value for t in Task], help="task family")
    g.add_argument("--noise", choices=[k.value for k in NoiseKind], help="noise distribution")
    g.add_argument("--noise-mu", type=float, help="noise location parameter")
    g.add_argument("--noise-scale", type=float, help="noise scale parameter")
    g.add_argument("--d", type=int, help="feature dimension (default 10)")
    g.add_argument("--n", type=int, help="sample count (default 10000)")
    g.add_argument("--seed", type=int, help="generation seed (default 0)")
    g.add_argument("--out", required=True, help="output dataset path (LIBSVM text)")

    r = sub.add_parser("reference", help="solve the full-batch baseline", formatter_class=_formatter)
    r.add_argument("--config", help="problem JSON (problem schema)")
    r.add_argument("--dataset", help="dataset path (LIBSVM text)")
    r.add_argument("--loss", choices=[m.value for m in LossModel], help="loss family")
    r.add_argument("--binary-labels", action="store_true", help="map {0,1}/{1,2} labels onto {-1,+1}")
    r.add_argument("--beta", type=float, default=0.95, help="CVaR level (default 0.95)")
    r.add_argument("--max-iters", type=int, default=100_000, help="iteration cap (default 100000)")
    r.add_argument("--tol", type=float, default=1e-10, help="relative stall tolerance (default 1e-10)")
    r.add_argument("--out", required=True, help="output reference JSON path")

    s = sub.add_parser("solve", help="run one (method, lambda, seed) cell", formatter_class=_formatter)
    s.add_argument("--config", help="problem JSON (problem schema)")
    s.add_argument("--dataset", help="dataset path (LIBSVM text)")
    s.add_argument("--loss", choices=[m.value for m in LossModel], help="loss family")
    s.add_argument("--binary-labels", action="store_true", help="map {0,1}/{1,2} labels onto {-1,+1}")
    s.add_argument("--method", choices=[m.value for m in Method], default="splplus", help="solver")
    s.add_argument("--lambda", dest="lam", type=float, default=1.0, help="step-size scalar")
    s.add_argument("--beta", type=float, default=0.95, help="CVaR level (default 0.95)")
    s.add_argument("--seed", type=int, default=1, help="run seed (init + sampling)")
    s.add_argument("--horizon", type=int, default=20_000, help="iterations (default 20000)")
    s.add_argument("--record-every", type=int, default=200, help="evaluation cadence (default 200)")
    s.add_argument("--schedule", choices=[k.value for k in ScheduleKind], default="sqrt-decay", help="step-size schedule")
    s.add_argument("--scaling", choices=["initial-loss", "manual"], default="initial-loss", help="prox-linear scaling rule")
    s.add_argument("--lambda-theta", type=float, default=1.0, help="manual multiplier for the parameter block")
    s.add_argument("--lambda-alpha", type=float, default=1.0, help="manual multiplier for the quantile block")
    s.add_argument("--out", required=True, help="output trace CSV path")

    w = sub.add_parser("sweep", help="run a sensitivity sweep", formatter_class=_formatter)
    w.add_argument("--config", required=True, help="sweep JSON (sweep schema)")
    w.add_argument("--out", help="output directory (overrides config)")
    w.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    w.add_argument("--beta", type=float, help="override CVaR level")
    w.add_argument("--horizon", type=int, help="override iterations per run")
    w.add_argument("--seed", type=int, action="append", dest="seeds", help="override run seeds (repeatable)")

    e = sub.add_parser("eval", help="evaluate a stored iterate", formatter_class=_formatter)
    e.add_argument("--config", help="problem JSON (problem schema)")
    e.add_argument("--dataset", help="dataset path (LIBSVM text)")
    e.add_argument("--loss", choices=[m.value for m in LossModel], help="loss family")
    e.add_argument("--binary-labels", action="store_true", help="map {0,1}/{1,2} labels onto {-1,+1}")
    e.add_argument("--beta", type=float, default=0.95, help="CVaR level (default 0.95)")
    e.add_argument("--iterate", required=True, help="iterate JSON with fields 'theta' and 'alpha'")

    return p


def _resolve_problem(args) -> tuple[Dataset, LossModel]:
    """Problem from --config (problem schema) or --dataset/--loss flags."""
    if args.config:
        cfg = _load_config(args.config, PROBLEM_SCHEMA)
        problem, loss, binary = _problem_from_dict(cfg)
        if isinstance(problem, SyntheticSpec):
            return synthetic_problem(problem)[0], problem.loss
        if args.loss:
            loss = LossModel(args.loss)
        if loss is None:
            raise UsageError("a loss is required: set problem.loss or pass --loss")
        return _load_dataset(problem, loss, binary or args.binary_labels), loss
    if not args.dataset:
        raise UsageError("either --config or --dataset is required")
    if not args.loss:
        raise UsageError("--loss is required with --dataset")
    loss = LossModel(args.loss)
    return _load_dataset(args.dataset, loss, args.binary_labels), loss


def _cmd_gen_data(args) -> int:
    if args.config:
        cfg = _load_config(args.config, PROBLEM_SCHEMA)
        problem, _, _ = _problem_from_dict(cfg)
        if not isinstance(problem, SyntheticSpec):
            raise UsageError("gen-data config must describe a synthetic problem")
        spec = problem
    else:
        if not args.task:
            raise UsageError("--task is required without --config")
        kind = NoiseKind(args.noise) if args.noise else NoiseKind.NORMAL
        base = NoiseSpec.default(kind)
        spec = SyntheticSpec(
            task=Task(args.task),
            noise=NoiseSpec(
                kind=kind,
                mu=args.noise_mu if args.noise_mu is not None else base.mu,
                scale=args.noise_scale if args.noise_scale is not None else base.scale,
            ),
            d=args.d if args.d is not None else 10,
            n=args.n if args.n is not None else 10_000,
            seed=args.seed if args.seed is not None else 0,
        )
    data = synthetic_problem(spec)[0]
    write_libsvm(from_dataset(data), args.out)
    print(f"wrote {data.n} x {data.d} dataset to {args.out}", file=sys.stderr)
    return 0


def _cmd_reference(args) -> int:
    data, loss = _resolve_problem(args)
    sol = solve_reference(
        data, loss, args.beta, theta0=np.zeros(data.d), max_iters=args.max_iters, tol=args.tol
    )
    sol.save(args.out)
    print(
        f"reference: F*={sol.f_star!r} alpha*={sol.alpha_star!r} "
        f"iterations={sol.iterations} stationarity={sol.stationarity!r}",
        file=sys.stderr,
    )
    return 0


def _cmd_solve(args) -> int:
    data, loss = _resolve_problem(args)
    config = SolverConfig(
        method=Method(args.method),
        beta=args.beta,
        schedule=Schedule(kind=ScheduleKind(args.schedule), base_lambda=args.lam),
        horizon=args.horizon,
        seed=args.seed,
        record_every=args.record_every,
        scaling=_scaling_from_flags(args),
    )
    init = initial_iterate(args.seed, data.d)
    rec = run(config, data, loss, init)
    write_trace_csv(rec.trace, args.out)
    status = "diverged" if rec.diverged else "ok"
    final = rec.trace[-1][1] if rec.trace else float("nan")
    print(f"solve {status}: records={len(rec.trace)} final_objective={final!r}", file=sys.stderr)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config, SWEEP_CONFIG_SCHEMA)
    if "problem" not in cfg:
        raise UsageError("sweep config must contain 'problem'")
    if "reference" not in cfg:
        raise UsageError("sweep config must contain 'reference'")
    problem, loss, binary = _problem_from_dict(cfg["problem"])
    spec = SweepSpec(
        problem=problem,
        lambda_grid=_grid_from_config(cfg.get("lambda_grid", "base")),
        seeds=tuple(args.seeds) if args.seeds else tuple(cfg.get("seeds", [1, 2, 3])),
        methods=tuple(Method(m) for m in cfg.get("methods", ["sgm", "spl", "splplus"])),
        epsilon_targets=tuple(cfg.get("epsilon_targets", [])),
        beta=args.beta if args.beta is not None else float(cfg.get("beta", 0.95)),
        horizon=args.horizon if args.horizon is not None else int(cfg.get("horizon", 20_000)),
        record_every=int(cfg.get("record_every", 200)),
        schedule_kind=ScheduleKind(cfg.get("schedule", "sqrt-decay")),
        scaling=_scaling_from_dict(cfg.get("scaling", {})),
        loss=loss,
        binary_labels=binary,
    )
    reference = ReferenceSolution.load(cfg["reference"])
    out_dir = args.out if args.out else cfg.get("out")
    if not out_dir:
        raise UsageError("an output directory is required: set 'out' in the config or pass --out")
    jobs = args.jobs if args.jobs is not None else int(cfg.get("jobs", os.cpu_count() or 1))
    result = run_sweep(spec, reference, jobs=jobs)
    paths = emit_results(result, out_dir, reference=reference, write_traces=bool(cfg.get("write_traces", False)))
    print(
        f"sweep done: {len(result.cells)} cells in {result.wall_seconds:.1f}s -> {paths['cells']}",
        file=sys.stderr,
    )
    return 0


def _cmd_eval(args) -> int:
    data, loss = _resolve_problem(args)
    try:
        obj = json.loads(Path(args.iterate).read_text())
        it = Iterate(theta=np.asarray(obj["theta"], dtype=np.float64), alpha=float(obj["alpha"]))
    except FileNotFoundError:
        raise UsageError(f"iterate file not found: {args.iterate}") from None
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"malformed iterate file {args.iterate}: {e}") from None
    f = empirical_objective(it.theta, it.alpha, args.beta, data, loss)
    v = exact_var(it.theta, args.beta, data, loss)
    c = exact_cvar(it.theta, args.beta, data, loss)
    print(f"F={f!r}")
    print(f"VaR={v!r}")
    print(f"CVaR={c!r}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "reference": _cmd_reference,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "eval": _cmd_eval,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except SystemExit as e:  # argparse exits itself on --help
        return int(e.code or 0)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())
