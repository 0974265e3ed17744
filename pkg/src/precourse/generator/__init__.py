"""Recourse generators: tree search with learned priors, plus an exhaustive
baseline for small fixtures."""

from .base import FAVORABLE_LABEL, GenerationResult, RecourseGenerator, stable_seed
from .exhaustive import ExhaustiveGenerator
from .mcts import (
    GeneratorConfig,
    MctsGenerator,
    NoFeasibleActionError,
    mcts_plan,
    reward,
    train_wfare,
)
from .policy import PolicyModel, UniformPolicy

__all__ = [
    "FAVORABLE_LABEL", "GenerationResult", "RecourseGenerator", "stable_seed",
    "ExhaustiveGenerator", "GeneratorConfig", "MctsGenerator",
    "NoFeasibleActionError", "mcts_plan", "reward", "train_wfare",
    "PolicyModel", "UniformPolicy",
]
