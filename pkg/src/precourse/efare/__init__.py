"""Explainable automaton generator distilled from search traces."""

from .augment import (
    DEFAULT_MISSING_COST,
    AugmentedState,
    augment,
    augmented_feature_names,
    feasible_function_costs,
)
from .automaton import (
    START,
    STOP,
    Automaton,
    AutomatonGenerator,
    BooleanRule,
    ExtractionResult,
    Trace,
    build_automaton,
    efare_generate,
    extract_traces,
    transition_fidelity,
)
from .cart import DecisionTree

__all__ = [
    "DEFAULT_MISSING_COST", "AugmentedState", "augment", "augmented_feature_names",
    "feasible_function_costs",
    "START", "STOP", "Automaton", "AutomatonGenerator", "BooleanRule",
    "ExtractionResult", "Trace", "build_automaton", "efare_generate",
    "extract_traces", "transition_fidelity",
    "DecisionTree",
]
