"""Explainable automaton tests: CART, augmentation, traces, traversal."""

import numpy as np
import pytest

from precourse.core import (
    ActionCatalog,
    ActionFunction,
    CausalGraph,
    FeatureSchema,
    NumericFeature,
    ScmWeights,
    achieves_recourse,
)
from precourse.efare import (
    START,
    STOP,
    Automaton,
    AutomatonGenerator,
    DecisionTree,
    augment,
    augmented_feature_names,
    build_automaton,
    efare_generate,
    extract_traces,
    transition_fidelity,
)
from precourse.generator import ExhaustiveGenerator

from .fixtures import random_state, random_weights, tiny_fixture
from .oracles import oracle_action_cost


class TestDecisionTree:
    def test_pure_labels_give_constant_leaf(self):
        X = np.array([[0.0], [1.0], [2.0]])
        tree = DecisionTree().fit(X, ["a", "a", "a"])
        assert tree.root.is_leaf
        assert tree.predict([5.0]) == "a"

    def test_perfect_single_split(self):
        X = np.array([[0.0, 9.0], [1.0, 9.0], [3.0, 9.0], [4.0, 9.0]])
        y = ["low", "low", "high", "high"]
        tree = DecisionTree(max_depth=3).fit(X, y)
        assert tree.root.feature == 0
        assert tree.root.threshold == pytest.approx(2.0)
        assert tree.predict([0.5, 9.0]) == "low"
        assert tree.predict([3.5, 9.0]) == "high"

    def test_tie_break_prefers_lowest_feature_then_threshold(self):
        # both features separate the classes equally well
        X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
        y = ["a", "a", "b", "b"]
        tree = DecisionTree().fit(X, y)
        assert tree.root.feature == 0

    def test_min_samples_leaf_respected(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = ["a", "b", "b", "b"]
        tree = DecisionTree(min_samples_leaf=2).fit(X, y)
        # the only admissible split is at 1.5 or 2.5; 0.5 would isolate one row
        if not tree.root.is_leaf:
            assert tree.root.threshold >= 1.5

    def test_depth_limit(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(size=(64, 3))
        y = [f"{int(a * 4)}{int(b * 4)}" for a, b, _ in X]
        tree = DecisionTree(max_depth=2).fit(X, y)

        def depth(node):
            if node.is_leaf:
                return 0
            return 1 + max(depth(node.left), depth(node.right))

        assert depth(tree.root) <= 2

    def test_path_literals_are_satisfied_by_input(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(80, 4))
        y = ["pos" if row[1] > 0.5 or row[2] > 0.8 else "neg" for row in X]
        tree = DecisionTree(max_depth=4).fit(X, y)
        for row in X[:20]:
            _, _, path = tree.predict_with_path(row)
            for feature, op, threshold in path:
                if op == "<=":
                    assert row[feature] <= threshold
                else:
                    assert row[feature] > threshold

    def test_serialization_round_trip(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(size=(40, 2))
        y = ["a" if a < 0.3 else "b" for a, _ in X]
        tree = DecisionTree(max_depth=3).fit(X, y)
        again = DecisionTree.from_dict(tree.to_dict())
        for row in X:
            assert tree.predict(row) == again.predict(row)


class TestAugment:
    def test_mean_of_feasible_grid_costs(self):
        schema = FeatureSchema(features=(NumericFeature("x", 0, 10, 1.0),))
        graph = CausalGraph(n_nodes=1, edges=())
        catalog = ActionCatalog(schema=schema, functions=(
            ActionFunction("bump", "x", "add", (1.0, 2.0)),))
        s = schema.state([0.0])
        w = ScmWeights((2.0,))  # grid costs are 2 and 4
        aug = augment(s, w, catalog, graph)
        assert aug.cost_features == (3.0,)

    def test_zero_weights_zero_cost_features(self):
        schema, graph, catalog, _ = tiny_fixture()
        s = schema.state([2.0, 2.0, 2.0, 1.0])
        aug = augment(s, ScmWeights.from_array(np.zeros(graph.m)), catalog, graph)
        assert all(c == 0.0 for c in aug.cost_features)

    def test_missing_function_gets_sentinel(self):
        schema, graph, catalog, _ = tiny_fixture()
        s = schema.state([2.0, 2.0, 0.0, 1.0])  # debt 0: pay_debt infeasible
        aug = augment(s, random_weights(np.random.default_rng(0), graph.m),
                      catalog, graph, missing_cost=123.0)
        names = augmented_feature_names(catalog)
        idx = names.index("avg_cost(pay_debt)") - len(schema)
        assert aug.cost_features[idx] == 123.0

    def test_matches_per_pair_oracle_means(self):
        schema, graph, catalog, _ = tiny_fixture()
        rng = np.random.default_rng(3)
        for _ in range(30):
            s = random_state(rng, schema)
            w = random_weights(rng, graph.m)
            aug = augment(s, w, catalog, graph, missing_cost=999.0)
            for fi, function in enumerate(catalog.functions):
                costs = []
                for x in function.grid:
                    action = catalog.action(function.id, x)
                    if action.feasible(s):
                        costs.append(oracle_action_cost(action, s, w, graph))
                want = float(np.mean(costs)) if costs else 999.0
                assert aug.cost_features[fi] == pytest.approx(want, abs=1e-12)

    def test_dimension(self):
        schema, graph, catalog, _ = tiny_fixture()
        s = schema.state([2.0, 2.0, 2.0, 1.0])
        aug = augment(s, random_weights(np.random.default_rng(4), graph.m),
                      catalog, graph)
        assert len(aug) == len(schema) + len(catalog.functions)
        assert len(augmented_feature_names(catalog)) == len(aug)


def _tiny_setup(n_states=30, seed=5):
    schema, graph, catalog, h = tiny_fixture()
    from precourse.belief import MixturePrior

    prior = MixturePrior.diagonal([0.5, 0.5],
                                  [[1.0] * graph.m, [2.0] * graph.m],
                                  [[0.3] * graph.m, [0.3] * graph.m])
    rng = np.random.default_rng(seed)
    states = []
    while len(states) < n_states:
        s = random_state(rng, schema)
        if h.predict(s) == 0:
            states.append(s)
    gen = ExhaustiveGenerator(catalog, graph, h, t_max=3)
    return schema, graph, catalog, h, prior, states, gen


class TestExtractTraces:
    def test_trace_count_bounded_and_replayable(self):
        schema, graph, catalog, h, prior, states, gen = _tiny_setup()
        result = extract_traces(gen, states, prior, h, n=20, catalog=catalog,
                                graph=graph, seed=1)
        assert len(result.traces) <= 20
        assert result.attempts <= 80
        for trace in result.traces:
            s0 = trace.steps[0][0].base
            iv_actions = tuple(a for _, a in trace.steps)
            from precourse.core import Intervention

            assert achieves_recourse(Intervention(iv_actions), s0, h)

    def test_hopeless_generator_yields_empty(self):
        schema, graph, catalog, h, prior, states, _ = _tiny_setup()

        class NoopGenerator:
            def generate(self, state, weights, forced_first=None):
                from precourse.core import Intervention
                from precourse.generator import GenerationResult

                return GenerationResult(Intervention(), success=False)

        result = extract_traces(NoopGenerator(), states, prior, h, n=5,
                                catalog=catalog, graph=graph, seed=2)
        assert result.traces == ()
        assert result.failures == result.attempts

    def test_sentinel_is_ten_times_max_feasible_cost(self):
        schema, graph, catalog, h, prior, states, gen = _tiny_setup()
        result = extract_traces(gen, states, prior, h, n=10, catalog=catalog,
                                graph=graph, seed=3)
        from precourse.efare import feasible_function_costs

        max_cost = 0.0
        for trace in result.traces:
            visited = [trace.steps[0][0].base]
            for _, action in trace.steps:
                visited.append(action.apply(visited[-1]))
            for s in visited:
                for costs in feasible_function_costs(s, trace.weights, catalog,
                                                     graph).values():
                    if costs:
                        max_cost = max(max_cost, max(costs))
        assert result.missing_cost == pytest.approx(10.0 * max_cost)


class TestBuildAutomaton:
    def test_single_sequence_gives_linear_chain(self):
        schema, graph, catalog, h, prior, states, gen = _tiny_setup()
        # handcraft traces that always follow the same two-action sequence
        from precourse.core import Intervention

        a1 = catalog.action("change_job", 1.0)
        a2 = catalog.action("raise_savings", 2.0)
        rng = np.random.default_rng(6)
        traces = []
        base = schema.state([4.0, 1.0, 2.0, 0.0])
        result_states = [base, a1.apply(base), a2.apply(a1.apply(base))]
        for i in range(6):
            w = random_weights(rng, graph.m, lo=0.5, hi=1.5)
            augs = [augment(s, w, catalog, graph, 50.0) for s in result_states]
            from precourse.efare import Trace

            traces.append(Trace(steps=((augs[0], a1), (augs[1], a2)),
                                final_state=augs[2], weights=w, source_index=i))
        aut = build_automaton(traces, missing_cost=50.0, catalog=catalog)
        assert aut.nodes[START]["edges"] == ["change_job"]
        assert aut.nodes["change_job"]["edges"] == ["raise_savings"]
        assert aut.nodes["raise_savings"]["edges"] == [STOP]
        # constant-leaf trees everywhere
        for node in (START, "change_job", "raise_savings"):
            assert aut.nodes[node]["tree"].root.is_leaf

    def test_self_fidelity_with_unlimited_depth(self):
        schema, graph, catalog, h, prior, states, gen = _tiny_setup(n_states=40)
        result = extract_traces(gen, states, prior, h, n=40, catalog=catalog,
                                graph=graph, seed=7, max_attempts=200)
        assert len(result.traces) >= 20
        aut = build_automaton(result.traces, result.missing_cost, catalog,
                              max_depth=None, min_samples_leaf=1)
        assert transition_fidelity(aut, result.traces) >= 0.9

    def test_cost_feature_split_on_separable_fixture(self):
        # two outgoing classes perfectly separated by one cost feature
        schema, graph, catalog, h, prior, states, gen = _tiny_setup()
        from precourse.efare import Trace

        a_cheap = catalog.action("raise_savings", 1.0)
        a_other = catalog.action("pay_debt", -1.0)
        base = schema.state([4.0, 1.0, 2.0, 1.0])
        names = augmented_feature_names(catalog)
        cost_idx = names.index("avg_cost(raise_savings)")
        traces = []
        rng = np.random.default_rng(8)
        for i in range(12):
            # low savings-cost users take raise_savings, high-cost ones pay debt
            low = i % 2 == 0
            w = np.full(graph.m, 1.0)
            w[1] = 0.2 if low else 3.0  # savings node weight
            w = ScmWeights.from_array(w)
            action = a_cheap if low else a_other
            aug0 = augment(base, w, catalog, graph, 50.0)
            aug1 = augment(action.apply(base), w, catalog, graph, 50.0)
            traces.append(Trace(steps=((aug0, action),), final_state=aug1,
                                weights=w, source_index=i))
        aut = build_automaton(traces, 50.0, catalog, max_depth=1)
        tree = aut.nodes[START]["tree"]
        assert not tree.root.is_leaf
        assert tree.root.feature == cost_idx

    def test_empty_traces_rejected(self):
        schema, graph, catalog, _, _, _, _ = _tiny_setup()
        with pytest.raises(ValueError):
            build_automaton([], 1.0, catalog)

    def test_serialization_round_trip_byte_identical(self):
        schema, graph, catalog, h, prior, states, gen = _tiny_setup()
        result = extract_traces(gen, states, prior, h, n=15, catalog=catalog,
                                graph=graph, seed=9)
        aut = build_automaton(result.traces, result.missing_cost, catalog)
        text = aut.to_text()
        again = Automaton.from_text(text)
        assert again.to_text() == text


class TestEfareGenerate:
    def _automaton(self, seed=10, n=40):
        schema, graph, catalog, h, prior, states, gen = _tiny_setup(n_states=40,
                                                                    seed=seed)
        result = extract_traces(gen, states, prior, h, n=n, catalog=catalog,
                                graph=graph, seed=seed, max_attempts=200)
        aut = build_automaton(result.traces, result.missing_cost, catalog)
        return schema, graph, catalog, h, prior, states, aut

    def test_deterministic(self):
        schema, graph, catalog, h, prior, states, aut = self._automaton()
        w = random_weights(np.random.default_rng(11), graph.m, lo=0.5, hi=2.0)
        s = states[0]
        out1 = efare_generate(s, w, aut, h, catalog, graph, t_max=4)
        out2 = efare_generate(s, w, aut, h, catalog, graph, t_max=4)
        assert out1[0].keys() == out2[0].keys()
        assert out1[1] == out2[1]
        assert out1[2] == out2[2]

    def test_rules_satisfied_by_emitting_state(self):
        schema, graph, catalog, h, prior, states, aut = self._automaton()
        rng = np.random.default_rng(12)
        names = augmented_feature_names(catalog)
        for s in states[:15]:
            w = random_weights(rng, graph.m, lo=0.3, hi=2.5)
            intervention, rules, _ = efare_generate(s, w, aut, h, catalog, graph,
                                                    t_max=4)
            current = s
            for action, rule in zip(intervention.actions, rules):
                aug = augment(current, w, catalog, graph, aut.missing_cost)
                mapping = dict(zip(names, aug.vector))
                assert rule.satisfied_by(mapping)
                current = action.apply(current)

    def test_respects_horizon_and_forced_first(self):
        schema, graph, catalog, h, prior, states, aut = self._automaton()
        rng = np.random.default_rng(13)
        for s in states[:10]:
            w = random_weights(rng, graph.m, lo=0.3, hi=2.5)
            options = [a for a in catalog.actions if a.feasible(s)]
            if not options:
                continue
            forced = options[int(rng.integers(len(options)))]
            intervention, rules, _ = efare_generate(s, w, aut, h, catalog, graph,
                                                    t_max=3, forced_first=forced)
            assert len(intervention) <= 3
            if len(intervention) > 0:
                assert intervention.actions[0].key() == forced.key()

    def test_cost_awareness_direction(self):
        # automaton built on the separable fixture routes by the learned
        # cost-feature threshold: changing only w flips the selected action
        schema, graph, catalog, h, prior, states, gen = _tiny_setup()
        from precourse.efare import Trace

        a_cheap = catalog.action("raise_savings", 1.0)
        a_other = catalog.action("pay_debt", -1.0)
        base = schema.state([4.0, 1.0, 2.0, 1.0])
        traces = []
        for i in range(12):
            low = i % 2 == 0
            w = np.full(graph.m, 1.0)
            w[1] = 0.2 if low else 3.0
            w = ScmWeights.from_array(w)
            action = a_cheap if low else a_other
            aug0 = augment(base, w, catalog, graph, 50.0)
            aug1 = augment(action.apply(base), w, catalog, graph, 50.0)
            traces.append(Trace(steps=((aug0, action),), final_state=aug1,
                                weights=w, source_index=i))
        aut = build_automaton(traces, 50.0, catalog, max_depth=2)
        w_low = ScmWeights.from_array(np.array([1.0, 0.2] + [1.0] * (graph.m - 2)))
        w_high = ScmWeights.from_array(np.array([1.0, 3.0] + [1.0] * (graph.m - 2)))
        iv_low, _, _ = efare_generate(base, w_low, aut, h, catalog, graph, t_max=1)
        iv_high, _, _ = efare_generate(base, w_high, aut, h, catalog, graph, t_max=1)
        assert iv_low.actions[0].function_id == "raise_savings"
        assert iv_high.actions[0].function_id == "pay_debt"

    def test_fidelity_monotone_in_depth(self):
        schema, graph, catalog, h, prior, states, gen = _tiny_setup(n_states=40)
        result = extract_traces(gen, states, prior, h, n=40, catalog=catalog,
                                graph=graph, seed=14, max_attempts=200)
        fidelities = []
        for depth in (1, 2, 4, None):
            aut = build_automaton(result.traces, result.missing_cost, catalog,
                                  max_depth=depth, min_samples_leaf=1)
            fidelities.append(transition_fidelity(aut, result.traces))
        assert all(b >= a - 1e-12 for a, b in zip(fidelities, fidelities[1:]))

    def test_generator_interface_with_forced_first(self):
        schema, graph, catalog, h, prior, states, aut = self._automaton()
        gen = AutomatonGenerator(aut, catalog, graph, h, t_max=4)
        rng = np.random.default_rng(15)
        checked = 0
        for s in states:
            if checked >= 10:
                break
            options = [a for a in catalog.actions if a.feasible(s)]
            if not options or h.predict(s) == 1:
                continue
            forced = options[int(rng.integers(len(options)))]
            result = gen.generate(s, random_weights(rng, graph.m, lo=0.3, hi=2.0),
                                  forced_first=forced)
            assert result.intervention.actions[0].key() == forced.key()
            checked += 1
