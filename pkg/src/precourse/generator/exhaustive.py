"""Exhaustive-search recourse generator for small action spaces.

Enumerates every feasible action sequence up to a horizon and returns the
cheapest one that flips the classifier. Exact and deterministic; intended
for small fixtures, oracles, and tiny datasets, not production scale.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core.actions import Action, ActionCatalog, Intervention, PreconditionError
from ..core.classifier import Classifier
from ..core.schema import State
from ..core.scm import CausalGraph, ScmWeights, intervention_cost
from .base import FAVORABLE_LABEL, GenerationResult, RecourseGenerator


@dataclass(frozen=True)
class ExhaustiveGenerator(RecourseGenerator):
    catalog: ActionCatalog
    graph: CausalGraph
    classifier: Classifier
    t_max: int = 4

    def generate(self, state: State, weights: ScmWeights,
                 forced_first: Action | None = None) -> GenerationResult:
        base_label = self.classifier.predict(state)
        if base_label == FAVORABLE_LABEL:
            # nothing to overturn; honor the forced action if one was requested
            if forced_first is None:
                return GenerationResult(Intervention(), success=True)
            if not forced_first.feasible(state):
                raise PreconditionError("forced first action is infeasible")
            return GenerationResult(Intervention((forced_first,)), success=True)

        prefix = Intervention()
        start = state
        if forced_first is not None:
            if not forced_first.feasible(state):
                raise PreconditionError("forced first action is infeasible")
            prefix = Intervention((forced_first,))
            start = forced_first.apply(state)

        best: Intervention | None = None
        best_cost = float("inf")
        action_rank = {a.key(): i for i, a in enumerate(self.catalog.actions)}

        def search(current: State, so_far: Intervention) -> None:
            nonlocal best, best_cost
            full = Intervention(prefix.actions + so_far.actions)
            if self.classifier.predict(current) != base_label:
                cost = intervention_cost(full, state, weights, self.graph)
                key = (cost, len(full), tuple(action_rank[a.key()] for a in full.actions))
                if best is None or key < (best_cost, len(best),
                                          tuple(action_rank[a.key()] for a in best.actions)):
                    best, best_cost = full, cost
                return  # extending a success only adds cost
            if len(full) >= self.t_max:
                return
            for action in self.catalog.actions:
                if action.feasible(current):
                    search(action.apply(current), so_far.append(action))

        search(start, Intervention())
        if best is not None:
            return GenerationResult(best, success=True)
        return GenerationResult(prefix, success=False)
