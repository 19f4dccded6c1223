"""Hybrid automata simulation and statistical model checking."""

from ._core import (
    EvalError,
    HysmcError,
    Model,
    ModelError,
    ParseError,
    PreconditionError,
    SemanticError,
    SimulationError,
    builtin,
    check,
    clopper_pearson,
    fatigue_aware_scenario,
    parse_model,
    pretty_print,
    required_runs,
    simulate,
    sweep,
    validate,
)

__all__ = [
    "EvalError",
    "HysmcError",
    "Model",
    "ModelError",
    "ParseError",
    "PreconditionError",
    "SemanticError",
    "SimulationError",
    "builtin",
    "check",
    "clopper_pearson",
    "fatigue_aware_scenario",
    "parse_model",
    "pretty_print",
    "required_runs",
    "simulate",
    "sweep",
    "validate",
]
