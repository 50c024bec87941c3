"""Figure emitter for the CVaR benchmark CSV outputs."""

__version__ = "0.1.0"

from .render import (
    PlotKind,
    PlotSpec,
    SchemaError,
    Series,
    prepare_convergence,
    prepare_iterations,
    prepare_sensitivity,
    render,
)

__all__ = [
    "PlotKind",
    "PlotSpec",
    "SchemaError",
    "Series",
    "prepare_convergence",
    "prepare_iterations",
    "prepare_sensitivity",
    "render",
]
