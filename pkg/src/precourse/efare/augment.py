"""Cost-augmented states for the explanation automaton.

The base feature vector is extended with one feature per action function:
the mean clamped cost of that function's feasible arguments under the
given weights. Functions with no feasible argument in the state receive a
sentinel cost supplied by the caller (the automaton stores the value it
was built with).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core.actions import ActionCatalog
from ..core.schema import State
from ..core.scm import CausalGraph, ScmWeights, action_cost_features

DEFAULT_MISSING_COST = 1e6


@dataclass(frozen=True)
class AugmentedState:
    base: State
    cost_features: tuple[float, ...]

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.base.values), self.cost_features])

    def __len__(self) -> int:
        return len(self.base.values) + len(self.cost_features)


def augmented_feature_names(catalog: ActionCatalog) -> tuple[str, ...]:
    base = catalog.schema.names()
    return base + tuple(f"avg_cost({fid})" for fid in catalog.function_ids())


def feasible_function_costs(state: State, weights: ScmWeights, catalog: ActionCatalog,
                            graph: CausalGraph) -> dict[str, list[float]]:
    """Clamped cost of every feasible (function, argument) pair, per function."""
    out: dict[str, list[float]] = {f.id: [] for f in catalog.functions}
    for action in catalog.actions:
        if action.feasible(state):
            raw = float(action_cost_features(action, state, graph) @ weights.array)
            out[action.function_id].append(max(0.0, raw))
    return out


def augment(state: State, weights: ScmWeights, catalog: ActionCatalog,
            graph: CausalGraph, missing_cost: float = DEFAULT_MISSING_COST) -> AugmentedState:
    """Appends per-function mean feasible-argument costs to the state."""
    costs = feasible_function_costs(state, weights, catalog, graph)
    features = tuple(
        float(np.mean(costs[fid])) if costs[fid] else float(missing_cost)
        for fid in catalog.function_ids())
    return AugmentedState(base=state, cost_features=features)
