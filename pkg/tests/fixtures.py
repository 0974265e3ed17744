"""Shared synthetic fixtures for the test suite."""

from __future__ import annotations

import numpy as np

from precourse.core import (
    ActionCatalog,
    ActionFunction,
    CategoricalFeature,
    CausalGraph,
    FeatureSchema,
    NumericFeature,
    Precondition,
    RuleClassifier,
    ScmWeights,
    State,
    parse_precondition,
)


def chain_fixture():
    """Three numeric features with a causal chain 0 -> 1 -> 2."""
    schema = FeatureSchema(features=(
        NumericFeature("a", 0.0, 10.0, 0.5),
        NumericFeature("b", 0.0, 10.0, 0.5),
        NumericFeature("c", 0.0, 10.0, 0.5),
    ))
    graph = CausalGraph(n_nodes=3, edges=((0, 1), (1, 2)))
    catalog = ActionCatalog(schema=schema, functions=(
        ActionFunction("raise_a", "a", "add", (0.5, 1.0, 2.0)),
        ActionFunction("raise_b", "b", "add", (0.5, 1.0, 2.0)),
        ActionFunction("raise_c", "c", "add", (0.5, 1.0, 2.0)),
        ActionFunction("lower_a", "a", "add", (-0.5, -1.0)),
    ))
    return schema, graph, catalog


def mixed_fixture():
    """Categorical + numeric schema with preconditions, used in property tests."""
    schema = FeatureSchema(features=(
        NumericFeature("income", 0.0, 10.0, 0.5),
        NumericFeature("savings", 0.0, 10.0, 0.5),
        CategoricalFeature("education", ("none", "highschool", "bachelor", "master")),
        CategoricalFeature("job", ("unemployed", "junior", "senior")),
    ))
    graph = CausalGraph(n_nodes=4, edges=((2, 0), (2, 3), (3, 0), (0, 1)))
    catalog = ActionCatalog(schema=schema, functions=(
        ActionFunction("raise_income", "income", "add", (0.5, 1.0, 2.0),
                       parse_precondition("job >= 1", schema)),
        ActionFunction("raise_savings", "savings", "add", (0.5, 1.0, 2.0),
                       parse_precondition("income >= 1", schema)),
        ActionFunction("study", "education", "set", (1.0, 2.0, 3.0)),
        ActionFunction("change_job", "job", "set", (1.0, 2.0),
                       parse_precondition("education >= 1", schema)),
    ))
    return schema, graph, catalog


def tiny_fixture():
    """4-feature fixture small enough for exhaustive search oracles.

    The rule classifier grants the favorable label once income and savings
    clear joint thresholds, reachable within three actions from most
    unfavorable states.
    """
    schema = FeatureSchema(features=(
        NumericFeature("income", 0.0, 8.0, 1.0),
        NumericFeature("savings", 0.0, 8.0, 1.0),
        NumericFeature("debt", 0.0, 4.0, 1.0),
        CategoricalFeature("job", ("unemployed", "junior", "senior")),
    ))
    graph = CausalGraph(n_nodes=4, edges=((3, 0), (0, 1), (2, 1)))
    catalog = ActionCatalog(schema=schema, functions=(
        ActionFunction("raise_income", "income", "add", (1.0, 2.0),
                       parse_precondition("job >= 1", schema)),
        ActionFunction("raise_savings", "savings", "add", (1.0, 2.0)),
        ActionFunction("pay_debt", "debt", "add", (-1.0, -2.0)),
        ActionFunction("change_job", "job", "set", (1.0, 2.0)),
    ))
    classifier = RuleClassifier.from_texts(
        ["income >= 4 and savings >= 3 and debt <= 2"], schema)
    return schema, graph, catalog, classifier


def random_state(rng: np.random.Generator, schema: FeatureSchema) -> State:
    values = []
    for f in schema.features:
        if isinstance(f, NumericFeature):
            values.append(float(rng.choice(f.grid())))
        else:
            values.append(float(rng.integers(0, len(f.levels))))
    return schema.state(values)


def random_weights(rng: np.random.Generator, m: int, lo: float = -1.0,
                   hi: float = 3.0) -> ScmWeights:
    return ScmWeights.from_array(rng.uniform(lo, hi, size=m))


def random_feasible_intervention(rng: np.random.Generator, catalog: ActionCatalog,
                                 state: State, length: int):
    """Random feasible action sequence of exactly `length` steps, or None."""
    from precourse.core import Intervention

    intervention = Intervention()
    for _ in range(length):
        options = [a for a in catalog.actions if a.feasible(state)]
        if not options:
            return None
        action = options[rng.integers(0, len(options))]
        intervention = intervention.append(action)
        state = action.apply(state)
    return intervention
