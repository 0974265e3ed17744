"""Explainable deterministic generator distilled from search traces.

Successful interventions are merged into an action graph (nodes = action
functions plus START/STOP). Each node carries a decision tree that reads
the cost-augmented state and selects the outgoing transition; each edge
carries an argument selector. Traversal is deterministic and emits one
Boolean rule (the tree path) per chosen action.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..core.actions import Action, ActionCatalog, Intervention
from ..core.classifier import Classifier, achieves_recourse
from ..core.schema import State
from ..core.scm import CausalGraph, ScmWeights
from ..generator.base import FAVORABLE_LABEL, GenerationResult, RecourseGenerator
from .augment import AugmentedState, augment, augmented_feature_names, feasible_function_costs
from .cart import DecisionTree

START = "START"
STOP = "STOP"
MISSING_COST_FACTOR = 10.0


@dataclass(frozen=True)
class BooleanRule:
    """Conjunction of threshold literals over augmented-state features."""

    literals: tuple[tuple[str, str, float], ...] = ()

    def satisfied_by(self, values: Mapping[str, float]) -> bool:
        for name, op, threshold in self.literals:
            v = values[name]
            if op == "<=" and not v <= threshold + 1e-12:
                return False
            if op == ">" and not v > threshold - 1e-12:
                return False
        return True

    def render(self) -> str:
        if not self.literals:
            return "always"
        return " and ".join(f"{name} {op} {threshold:.4g}"
                            for name, op, threshold in self.literals)


@dataclass(frozen=True)
class Trace:
    """One successful generator run: the augmented state before each action,
    the action taken, and the augmented terminal state."""

    steps: tuple[tuple[AugmentedState, Action], ...]
    final_state: AugmentedState
    weights: ScmWeights
    source_index: int

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("a trace needs at least one action")


@dataclass(frozen=True)
class ExtractionResult:
    traces: tuple[Trace, ...]
    attempts: int
    failures: int
    missing_cost: float


def extract_traces(generator: RecourseGenerator, states: Sequence[State],
                   weight_sampler, classifier: Classifier, n: int,
                   catalog: ActionCatalog, graph: CausalGraph,
                   seed: int = 0, max_attempts: int | None = None) -> ExtractionResult:
    """Collects up to n successful, replay-validated traces; failures are
    skipped and counted. The sentinel cost for functions with no feasible
    argument is 10x the largest feasible action cost seen in the pool."""
    rng = np.random.default_rng(seed)
    max_attempts = max_attempts if max_attempts is not None else 4 * n
    raw: list[tuple[State, list[State], Intervention, ScmWeights]] = []
    attempts = failures = 0
    while len(raw) < n and attempts < max_attempts:
        state = states[attempts % len(states)]
        attempts += 1
        weights = ScmWeights.from_array(weight_sampler.sample(1, rng)[0]) \
            if hasattr(weight_sampler, "sample") else weight_sampler(rng)
        result = generator.generate(state, weights)
        if not result.success or len(result.intervention) == 0:
            failures += 1
            continue
        if not achieves_recourse(result.intervention, state, classifier):
            failures += 1
            continue
        visited = [state]
        for action in result.intervention.actions:
            visited.append(action.apply(visited[-1]))
        raw.append((state, visited, result.intervention, weights))

    max_cost = 0.0
    for _, visited, _, weights in raw:
        for s in visited:
            for costs in feasible_function_costs(s, weights, catalog, graph).values():
                if costs:
                    max_cost = max(max_cost, max(costs))
    missing = MISSING_COST_FACTOR * max_cost if max_cost > 0 else 1.0

    traces = []
    for idx, (state, visited, intervention, weights) in enumerate(raw):
        augmented = [augment(s, weights, catalog, graph, missing) for s in visited]
        steps = tuple(zip(augmented[:-1], intervention.actions))
        traces.append(Trace(steps=steps, final_state=augmented[-1],
                            weights=weights, source_index=idx))
    return ExtractionResult(traces=tuple(traces), attempts=attempts,
                            failures=failures, missing_cost=missing)


@dataclass
class Automaton:
    """Action graph with per-node transition trees and per-edge argument
    selectors over cost-augmented states."""

    feature_names: tuple[str, ...]
    nodes: dict  # node id -> {"edges": [next ids], "tree": DecisionTree}
    edge_selectors: dict  # (node, next fid) -> DecisionTree over argument values
    missing_cost: float
    max_depth: int | None = 4

    def outgoing(self, node: str) -> list[str]:
        return list(self.nodes[node]["edges"])

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "missing_cost": self.missing_cost,
            "max_depth": self.max_depth,
            "feature_names": list(self.feature_names),
            "nodes": {node: {"edges": list(payload["edges"]),
                             "tree": payload["tree"].to_dict() if payload["tree"] else None}
                      for node, payload in sorted(self.nodes.items())},
            "edge_selectors": {f"{u}->{v}": tree.to_dict()
                               for (u, v), tree in sorted(self.edge_selectors.items())},
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "Automaton":
        nodes = {}
        for node, payload in data["nodes"].items():
            tree = DecisionTree.from_dict(payload["tree"]) if payload["tree"] else None
            nodes[node] = {"edges": list(payload["edges"]), "tree": tree}
        selectors = {}
        for key, blob in data["edge_selectors"].items():
            u, v = key.split("->")
            selectors[(u, v)] = DecisionTree.from_dict(blob)
        return cls(feature_names=tuple(data["feature_names"]), nodes=nodes,
                   edge_selectors=selectors, missing_cost=float(data["missing_cost"]),
                   max_depth=data.get("max_depth"))

    @classmethod
    def from_text(cls, text: str) -> "Automaton":
        return cls.from_dict(json.loads(text))


def build_automaton(traces: Sequence[Trace], missing_cost: float,
                    catalog: ActionCatalog, *, max_depth: int | None = 4,
                    min_samples_leaf: int = 2) -> Automaton:
    """Merges traces into the transition graph and trains the node trees and
    edge argument selectors."""
    if not traces:
        raise ValueError("cannot build an automaton from zero traces")
    node_examples: dict[str, list[tuple[np.ndarray, str]]] = {}
    edge_examples: dict[tuple[str, str], list[tuple[np.ndarray, float]]] = {}

    for trace in traces:
        node = START
        for aug, action in trace.steps:
            fid = action.function_id
            node_examples.setdefault(node, []).append((aug.vector, fid))
            edge_examples.setdefault((node, fid), []).append((aug.vector, action.argument))
            node = fid
        node_examples.setdefault(node, []).append((trace.final_state.vector, STOP))

    nodes: dict[str, dict] = {STOP: {"edges": [], "tree": None}}
    for node, examples in node_examples.items():
        X = np.stack([x for x, _ in examples])
        y = [label for _, label in examples]
        tree = DecisionTree(max_depth=max_depth,
                            min_samples_leaf=min_samples_leaf).fit(X, y)
        edges = sorted(set(y))
        nodes[node] = {"edges": edges, "tree": tree}

    selectors = {}
    for (u, v), examples in edge_examples.items():
        X = np.stack([x for x, _ in examples])
        y = [arg for _, arg in examples]
        selectors[(u, v)] = DecisionTree(max_depth=max_depth,
                                         min_samples_leaf=min_samples_leaf).fit(X, y)

    names = augmented_feature_names(catalog)
    return Automaton(feature_names=names, nodes=nodes, edge_selectors=selectors,
                     missing_cost=missing_cost, max_depth=max_depth)


def transition_fidelity(automaton: Automaton, traces: Sequence[Trace]) -> float:
    """Fraction of observed transitions the node trees reproduce."""
    hits = total = 0
    for trace in traces:
        node = START
        for aug, action in trace.steps:
            pred = automaton.nodes[node]["tree"].predict(aug.vector)
            hits += pred == action.function_id
            total += 1
            node = action.function_id
        pred = automaton.nodes[node]["tree"].predict(trace.final_state.vector)
        hits += pred == STOP
        total += 1
    return hits / total if total else 0.0


def _rule_from_path(path, feature_names) -> BooleanRule:
    return BooleanRule(literals=tuple((feature_names[f], op, thr)
                                      for f, op, thr in path))


def efare_generate(state: State, weights: ScmWeights, automaton: Automaton,
                   classifier: Classifier, catalog: ActionCatalog, graph: CausalGraph,
                   t_max: int, forced_first: Action | None = None,
                   ) -> tuple[Intervention, tuple[BooleanRule, ...], bool]:
    """Deterministic traversal from START guided by the node trees.

    Emits one rule per chosen action. When a tree's top choice is
    infeasible, the feasible outgoing edge with the next-highest vote is
    used; if none is feasible the traversal stops.
    """
    base_label = classifier.predict(state)
    node = START
    current = state
    intervention = Intervention()
    rules: list[BooleanRule] = []

    while len(intervention) < t_max:
        if classifier.predict(current) != base_label:
            break
        aug = augment(current, weights, catalog, graph, automaton.missing_cost)
        chosen: Action | None = None
        rule = BooleanRule()

        if forced_first is not None and len(intervention) == 0:
            if not forced_first.feasible(current):
                raise ValueError("forced first action is infeasible")
            chosen = forced_first
        else:
            if node not in automaton.nodes or automaton.nodes[node]["tree"] is None:
                break
            _, votes, path = automaton.nodes[node]["tree"].predict_with_path(aug.vector)
            rule = _rule_from_path(path, automaton.feature_names)
            stop = False
            for candidate, _count in votes:
                if candidate == STOP:
                    stop = True
                    break
                action = _select_action(automaton, node, candidate, aug, current, catalog)
                if action is not None:
                    chosen = action
                    break
            if stop or chosen is None:
                break

        current = chosen.apply(current)
        intervention = intervention.append(chosen)
        rules.append(rule)
        node = chosen.function_id

    success = classifier.predict(current) != base_label
    return intervention, tuple(rules), success


def _select_action(automaton: Automaton, node: str, fid: str, aug: AugmentedState,
                   state: State, catalog: ActionCatalog) -> Action | None:
    """Argument for the chosen function: selector vote order first, then the
    remaining grid arguments; None when nothing is feasible."""
    function = catalog.function(fid)
    ordered: list[float] = []
    selector = automaton.edge_selectors.get((node, fid))
    if selector is not None:
        _, votes, _ = selector.predict_with_path(aug.vector)
        ordered.extend(float(arg) for arg, _ in votes)
    ordered.extend(x for x in function.grid if x not in ordered)
    for x in ordered:
        action = catalog.action(fid, x)
        if action.feasible(state):
            return action
    return None


@dataclass
class AutomatonGenerator(RecourseGenerator):
    """Deterministic explainable generator backed by a trace automaton."""

    automaton: Automaton
    catalog: ActionCatalog
    graph: CausalGraph
    classifier: Classifier
    t_max: int = 6

    def generate(self, state: State, weights: ScmWeights,
                 forced_first: Action | None = None) -> GenerationResult:
        if self.classifier.predict(state) == FAVORABLE_LABEL:
            if forced_first is None:
                return GenerationResult(Intervention(), success=True)
            if not forced_first.feasible(state):
                raise ValueError("forced first action is infeasible")
            return GenerationResult(Intervention((forced_first,)), success=True,
                                    rules=(BooleanRule(),))
        intervention, rules, success = efare_generate(
            state, weights, self.automaton, self.classifier, self.catalog,
            self.graph, self.t_max, forced_first)
        if forced_first is not None and len(intervention) == 0:
            intervention = Intervention((forced_first,))
            rules = (BooleanRule(),)
            success = False
        return GenerationResult(intervention, success, rules=rules)
