"""Needle-steering planning and verification engine."""

from ._core import (
    ConfigError,
    DegenerateGeometry,
    Error,
    InsufficientData,
    ParseError,
    builtin_names,
    experiment_csv,
    fit_circle,
    match,
    model_trace,
    render_svg,
    run,
    run_log,
    scenario_json,
    synthesize,
    trace_deviation,
    verify,
)

__all__ = [
    "ConfigError",
    "DegenerateGeometry",
    "Error",
    "InsufficientData",
    "ParseError",
    "builtin_names",
    "experiment_csv",
    "fit_circle",
    "match",
    "model_trace",
    "render_svg",
    "run",
    "run_log",
    "scenario_json",
    "synthesize",
    "trace_deviation",
    "verify",
]
