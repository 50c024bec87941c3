"""CSV -> figure transforms for the benchmark harness outputs.

This package never recomputes optimization results; it reads the documented
CSV contracts and draws. Rendering is deterministic: fixed colors per method,
no timestamps embedded, identical input bytes give identical output bytes.

CSV contracts consumed:
  aggregate.csv : method, lambda, n_seeds, n_diverged, subopt_median,
                  subopt_min, subopt_max, rel_subopt_median, rel_subopt_min,
                  rel_subopt_max
  cells.csv     : method, lambda, seed, final_subopt, rel_subopt, initial_gap,
                  diverged, iters_to_eps@<eps> ... (empty field = not reached)
  trace csv     : iteration, averaged_objective
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METHOD_COLORS = {"sgm": "tab:blue", "spl": "tab:orange", "splplus": "tab:green"}
METHOD_LABELS = {"sgm": "SGM", "spl": "SPL", "splplus": "SPL+"}

AGGREGATE_COLUMNS = [
    "method",
    "lambda",
    "subopt_median",
    "subopt_min",
    "subopt_max",
]
CELLS_COLUMNS = ["method", "lambda", "seed", "final_subopt", "diverged"]
TRACE_COLUMNS = ["iteration", "averaged_objective"]

PNG_METADATA = {"Software": "cvarviz"}


class PlotKind(Enum):
    SENSITIVITY = "sensitivity"
    ITERATIONS_TO_EPS = "iterations-to-eps"
    CONVERGENCE = "convergence"


@dataclass(frozen=True)
class PlotSpec:
    inputs: tuple[str, ...]
    kind: PlotKind
    out: str
    log_x: bool = True
    eps: float | None = None

    def __post_init__(self):
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        object.__setattr__(self, "inputs", tuple(str(p) for p in self.inputs))


class SchemaError(ValueError):
    """Input CSV does not match the documented column contract."""


def _read_rows(path: str, required: list[str]) -> list[dict]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(
                f"{path}: missing required columns {missing}; found {header}"
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


@dataclass
class Series:
    label: str
    color: str
    x: list[float]
    y: list[float]
    lo: list[float] = field(default_factory=list)
    hi: list[float] = field(default_factory=list)


def _method_series(rows, value_cols, method):
    pts = [r for r in rows if r["method"] == method]
    pts.sort(key=lambda r: float(r["lambda"]))
    xs, ys, los, his = [], [], [], []
    for r in pts:
        vals = [r[c] for c in value_cols]
        if any(v == "" for v in vals):
            continue
        xs.append(float(r["lambda"]))
        med, lo, hi = (float(v) for v in vals)
        ys.append(med)
        los.append(lo)
        his.append(hi)
    return xs, ys, los, his


def prepare_sensitivity(rows: list[dict]) -> list[Series]:
    """aggregate.csv -> one (median, min..max band) series per method."""
    methods = sorted({r["method"] for r in rows}, key=lambda m: list(METHOD_COLORS).index(m) if m in METHOD_COLORS else 99)
    series = []
    for m in methods:
        xs, ys, los, his = _method_series(rows, ["subopt_median", "subopt_min", "subopt_max"], m)
        series.append(
            Series(
                label=METHOD_LABELS.get(m, m),
                color=METHOD_COLORS.get(m, "tab:gray"),
                x=xs, y=ys, lo=los, hi=his,
            )
        )
    return series


def prepare_iterations(rows: list[dict], eps: float) -> list[Series]:
    """cells.csv -> iterations-to-eps medians with min/max bands per method.

    Not-reached cells (empty fields) are dropped; a step size where no seed
    reached the target contributes no point at all.
    """
    col = f"iters_to_eps@{eps!r}"
    if rows and col not in rows[0]:
        available = [c for c in rows[0] if c.startswith("iters_to_eps@")]
        raise SchemaError(f"no column {col!r}; available epsilon columns: {available}")
    series = []
    methods = sorted({r["method"] for r in rows}, key=lambda m: list(METHOD_COLORS).index(m) if m in METHOD_COLORS else 99)
    for m in methods:
        by_lambda: dict[float, list[int]] = {}
        for r in rows:
            if r["method"] != m or r[col] == "":
                continue
            by_lambda.setdefault(float(r["lambda"]), []).append(int(r[col]))
        xs = sorted(by_lambda)
        ys = [float(_median(by_lambda[x])) for x in xs]
        los = [float(min(by_lambda[x])) for x in xs]
        his = [float(max(by_lambda[x])) for x in xs]
        series.append(
            Series(label=METHOD_LABELS.get(m, m), color=METHOD_COLORS.get(m, "tab:gray"),
                   x=xs, y=ys, lo=los, hi=his)
        )
    return series


def _median(values):
    vals = sorted(values)
    n = len(vals)
    mid = n // 2
    return vals[mid] if n % 2 else 0.5 * (vals[mid - 1] + vals[mid])


def prepare_convergence(paths: tuple[str, ...]) -> list[Series]:
    """trace CSVs -> one objective-vs-iteration line per file."""
    palette = ["tab:blue", "tab:orange", "tab:green", "tab:red", "tab:purple", "tab:brown"]
    series = []
    for i, path in enumerate(paths):
        rows = _read_rows(path, TRACE_COLUMNS)
        xs = [float(r["iteration"]) for r in rows]
        ys = [float(r["averaged_objective"]) for r in rows]
        series.append(Series(label=Path(path).stem, color=palette[i % len(palette)], x=xs, y=ys))
    return series


def render(spec: PlotSpec) -> str:
    """Render the figure described by ``spec``; returns the output path."""
    if spec.kind is PlotKind.SENSITIVITY:
        rows = _read_rows(spec.inputs[0], AGGREGATE_COLUMNS)
        series = prepare_sensitivity(rows)
        ylabel = "final suboptimality"
        log_y = True
    elif spec.kind is PlotKind.ITERATIONS_TO_EPS:
        if spec.eps is None:
            raise ValueError("iterations-to-eps plots need an --eps selector")
        rows = _read_rows(spec.inputs[0], CELLS_COLUMNS)
        series = prepare_iterations(rows, spec.eps)
        ylabel = f"iterations to suboptimality {spec.eps!r}"
        log_y = True
    else:
        series = prepare_convergence(spec.inputs)
        ylabel = "averaged-iterate objective"
        log_y = False

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    for s in series:
        if not s.x:
            continue
        ax.plot(s.x, s.y, color=s.color, label=s.label, marker="o", markersize=3)
        if s.lo and s.hi:
            ax.fill_between(s.x, s.lo, s.hi, color=s.color, alpha=0.2, linewidth=0)
    if spec.log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("iteration" if spec.kind is PlotKind.CONVERGENCE else "step-size scalar")
    ax.set_ylabel(ylabel)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(spec.out, format="png", metadata=PNG_METADATA)
    plt.close(fig)
    return spec.out
