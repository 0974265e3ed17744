"""Cost-aware tree-search recourse generator.

Monte Carlo tree search with PUCT selection. Child priors come from the
two-head policy (function distribution times argument-bin distribution,
renormalized over feasible actions); leaves are scored by policy-guided
rollouts; a completed trajectory that flips the classifier earns
penalty_base ** cost, so cheaper successes score strictly higher. The
plan commits one action per move by root visit count and returns the
cheapest flipping trajectory observed anywhere during the search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core.actions import (
    Action,
    ActionCatalog,
    Intervention,
    PreconditionError,
    feasible_actions,
)
from ..core.classifier import Classifier
from ..core.schema import State
from ..core.scm import CausalGraph, ScmWeights, action_cost_features, intervention_cost
from .base import FAVORABLE_LABEL, GenerationResult, RecourseGenerator, stable_seed
from .policy import PolicyModel, UniformPolicy


class NoFeasibleActionError(RuntimeError):
    """The search root has no applicable action."""


@dataclass(frozen=True)
class GeneratorConfig:
    """Search and training knobs for the tree-search generator."""

    t_max: int = 6
    simulations: int = 200
    lambda_pen: float = 0.9
    c_puct: float = 1.5
    epochs: int = 20
    episodes_per_epoch: int = 64
    batch_size: int = 64
    learning_rate: float = 3e-3
    hidden: int = 32
    replay_cap: int = 8000

    def __post_init__(self) -> None:
        if not 0.0 < self.lambda_pen < 1.0:
            raise ValueError("lambda_pen must lie strictly inside (0, 1)")
        if self.t_max < 1 or self.simulations < 0 or self.c_puct <= 0:
            raise ValueError("t_max >= 1, simulations >= 0, c_puct > 0 required")

    @classmethod
    def from_mapping(cls, data: dict) -> "GeneratorConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


def reward(intervention: Intervention, state: State, weights: ScmWeights,
           classifier: Classifier, lambda_pen: float, graph: CausalGraph) -> float:
    """penalty_base ** cost when the intervention flips the label, else 0."""
    from ..core.classifier import achieves_recourse

    if not 0.0 < lambda_pen < 1.0:
        raise ValueError("lambda_pen must lie strictly inside (0, 1)")
    if not achieves_recourse(intervention, state, classifier):
        return 0.0
    return lambda_pen ** intervention_cost(intervention, state, weights, graph)


class _Node:
    __slots__ = ("state", "seq", "cost", "depth", "flipped", "actions", "priors",
                 "n", "w", "children", "expanded")

    def __init__(self, state: State, seq: tuple[Action, ...], cost: float,
                 depth: int, flipped: bool):
        self.state = state
        self.seq = seq
        self.cost = cost
        self.depth = depth
        self.flipped = flipped
        self.actions: list[Action] = []
        self.priors: np.ndarray | None = None
        self.n: np.ndarray | None = None
        self.w: np.ndarray | None = None
        self.children: list[_Node | None] = []
        self.expanded = False


class _Search:
    def __init__(self, catalog: ActionCatalog, graph: CausalGraph,
                 classifier: Classifier, policy, config: GeneratorConfig,
                 weights: ScmWeights, base_label: int, rng: np.random.Generator):
        self.catalog = catalog
        self.graph = graph
        self.classifier = classifier
        self.policy = policy
        self.cfg = config
        self.weights = weights
        self.base_label = base_label
        self.rng = rng
        self.f_index = {fid: i for i, fid in enumerate(catalog.function_ids())}
        self.grid_index = {}
        for f in catalog.functions:
            for gi, x in enumerate(f.grid):
                self.grid_index[(f.id, x)] = gi
        self.best_seq: tuple[Action, ...] | None = None
        self.best_cost = math.inf

    def node(self, state: State, seq: tuple[Action, ...], cost: float) -> _Node:
        flipped = self.classifier.predict(state) != self.base_label
        node = _Node(state, seq, cost, len(seq), flipped)
        if flipped:
            self._record(seq, cost)
        return node

    def _record(self, seq: tuple[Action, ...], cost: float) -> None:
        if cost < self.best_cost - 1e-15:
            self.best_seq, self.best_cost = seq, cost

    def step_cost(self, action: Action, state: State) -> float:
        raw = float(action_cost_features(action, state, self.graph) @ self.weights.array)
        return max(0.0, raw)

    def action_priors(self, state: State, actions: list[Action]) -> np.ndarray:
        pf, px = self.policy.priors(state, self.weights)
        p = np.array([pf[self.f_index[a.function_id]]
                      * px[self.grid_index[(a.function_id, a.argument)]]
                      for a in actions])
        total = p.sum()
        return p / total if total > 0 else np.full(len(actions), 1.0 / len(actions))

    def expand(self, node: _Node) -> None:
        node.actions = feasible_actions(node.state, self.catalog)
        k = len(node.actions)
        node.priors = self.action_priors(node.state, node.actions) if k else np.zeros(0)
        node.n = np.zeros(k)
        node.w = np.zeros(k)
        node.children = [None] * k
        node.expanded = True

    def is_terminal(self, node: _Node) -> bool:
        if node.flipped or node.depth >= self.cfg.t_max:
            return True
        if node.expanded and not node.actions:
            return True
        return False

    def terminal_value(self, node: _Node) -> float:
        return self.cfg.lambda_pen ** node.cost if node.flipped else 0.0

    def select_child(self, node: _Node) -> int:
        total = node.n.sum()
        scale = self.cfg.c_puct * math.sqrt(total)
        q = np.divide(node.w, node.n, out=np.zeros_like(node.w), where=node.n > 0)
        scores = q + scale * node.priors / (1.0 + node.n)
        return int(np.argmax(scores))  # first max wins: catalog-order tie-break

    def child(self, node: _Node, i: int) -> _Node:
        if node.children[i] is None:
            action = node.actions[i]
            cost = node.cost + self.step_cost(action, node.state)
            node.children[i] = self.node(action.apply(node.state),
                                         node.seq + (action,), cost)
        return node.children[i]

    def rollout(self, node: _Node) -> float:
        state, seq, cost = node.state, node.seq, node.cost
        depth = node.depth
        while depth < self.cfg.t_max:
            actions = feasible_actions(state, self.catalog)
            if not actions:
                return 0.0
            probs = self.action_priors(state, actions)
            i = int(self.rng.choice(len(actions), p=probs))
            action = actions[i]
            cost += self.step_cost(action, state)
            state = action.apply(state)
            seq = seq + (action,)
            depth += 1
            if self.classifier.predict(state) != self.base_label:
                self._record(seq, cost)
                return self.cfg.lambda_pen ** cost
        return 0.0

    def simulate(self, root: _Node) -> None:
        node = root
        path: list[tuple[_Node, int]] = []
        while True:
            if self.is_terminal(node):
                value = self.terminal_value(node)
                break
            if not node.expanded:
                self.expand(node)
                if not node.actions:
                    value = 0.0
                    break
                value = self.rollout(node)
                break
            i = self.select_child(node)
            path.append((node, i))
            node = self.child(node, i)
        for parent, i in path:
            parent.n[i] += 1
            parent.w[i] += value


@dataclass
class TrainingExample:
    inputs: np.ndarray
    target_f: np.ndarray
    target_x: np.ndarray


def mcts_plan(state: State, weights: ScmWeights, classifier: Classifier, policy,
              config: GeneratorConfig, catalog: ActionCatalog, graph: CausalGraph,
              forced_first: Action | None = None, rng: np.random.Generator | None = None,
              collect: list[TrainingExample] | None = None) -> tuple[Intervention, bool]:
    """Plan an intervention of length <= t_max; returns (intervention, success).

    When `collect` is given, the root visit distributions of every move are
    appended as training targets.
    """
    rng = rng or np.random.default_rng(0)
    base_label = classifier.predict(state)
    if base_label == FAVORABLE_LABEL:
        if forced_first is None:
            return Intervention(), True
        if not forced_first.feasible(state):
            raise PreconditionError("forced first action is infeasible")
        return Intervention((forced_first,)), True

    search = _Search(catalog, graph, classifier, policy, config, weights,
                     base_label, rng)
    if not feasible_actions(state, catalog):
        raise NoFeasibleActionError("no feasible action at the search root")

    root = search.node(state, (), 0.0)
    if forced_first is not None:
        if not forced_first.feasible(state):
            raise PreconditionError("forced first action is infeasible")
        cost = search.step_cost(forced_first, state)
        root = search.node(forced_first.apply(state), (forced_first,), cost)

    while not root.flipped and root.depth < config.t_max:
        if not root.expanded:
            search.expand(root)
        if not root.actions:
            break
        for _ in range(config.simulations):
            search.simulate(root)
        if collect is not None and root.n.sum() > 0:
            collect.append(_visit_targets(search, root))
        if root.n.sum() == 0:
            move = int(rng.choice(len(root.actions), p=root.priors))
        else:
            move = int(np.argmax(root.n))  # ties: catalog order via first max
        root = search.child(root, move)

    committed_ok = root.flipped
    best_seq, best_cost = search.best_seq, search.best_cost
    if committed_ok and root.cost <= best_cost + 1e-15:
        return Intervention(root.seq), True
    if best_seq is not None:
        return Intervention(best_seq), True
    return Intervention(root.seq), False


def _visit_targets(search: _Search, root: _Node) -> TrainingExample:
    policy = search.policy
    tf = np.zeros(len(search.f_index))
    tx = np.zeros(policy.grid_size)
    for i, action in enumerate(root.actions):
        tf[search.f_index[action.function_id]] += root.n[i]
        tx[search.grid_index[(action.function_id, action.argument)]] += root.n[i]
    tf /= tf.sum()
    tx /= tx.sum()
    return TrainingExample(inputs=policy.encode_input(root.state, search.weights),
                           target_f=tf, target_x=tx)


@dataclass
class MctsGenerator(RecourseGenerator):
    """Stochastic-search generator; per-call randomness derives from the
    inputs so identical calls return identical plans."""

    catalog: ActionCatalog
    graph: CausalGraph
    classifier: Classifier
    policy: PolicyModel | UniformPolicy
    config: GeneratorConfig
    base_seed: int = 0

    def generate(self, state: State, weights: ScmWeights,
                 forced_first: Action | None = None) -> GenerationResult:
        forced_key = forced_first.key() if forced_first is not None else None
        seed = stable_seed("mcts", self.base_seed, state.values, weights.values, forced_key)
        try:
            intervention, success = mcts_plan(
                state, weights, self.classifier, self.policy, self.config,
                self.catalog, self.graph, forced_first=forced_first,
                rng=np.random.default_rng(seed))
        except NoFeasibleActionError:
            return GenerationResult(Intervention(), False)
        return GenerationResult(intervention, success)


WeightSampler = Callable[[np.random.Generator], ScmWeights]


def train_wfare(train_states: list[State], weight_sampler, classifier: Classifier,
                config: GeneratorConfig, catalog: ActionCatalog, graph: CausalGraph,
                *, seed: int = 0, policy: PolicyModel | None = None,
                ) -> tuple[PolicyModel, list[dict]]:
    """Self-play policy training: plan with search, fit the heads to the
    root visit distributions of successful episodes.

    `weight_sampler` is either a prior with a .sample(n, rng) method or a
    callable rng -> ScmWeights. Returns the trained policy and a log with
    one row per epoch (epoch, loss, validity). Epochs with no successful
    episode are reported with loss NaN and leave the policy unchanged.
    """
    if not train_states:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(seed)
    schema = train_states[0].schema
    if policy is None:
        from ..core.classifier import StateEncoder

        policy = PolicyModel.initialize(
            StateEncoder.from_domain(schema), catalog.function_ids(),
            catalog.max_grid_size(), m=graph.m, hidden=config.hidden,
            seed=int(rng.integers(2 ** 31)))

    def draw_weights(r: np.random.Generator) -> ScmWeights:
        if hasattr(weight_sampler, "sample"):
            return ScmWeights.from_array(weight_sampler.sample(1, r)[0])
        return weight_sampler(r)

    buffer: list[TrainingExample] = []
    log: list[dict] = []
    for epoch in range(config.epochs):
        successes = 0
        for _ in range(config.episodes_per_epoch):
            state = train_states[int(rng.integers(len(train_states)))]
            weights = draw_weights(rng)
            collected: list[TrainingExample] = []
            try:
                _, success = mcts_plan(state, weights, classifier, policy, config,
                                       catalog, graph, rng=rng, collect=collected)
            except NoFeasibleActionError:
                continue
            if success:
                successes += 1
                buffer.extend(collected)
        buffer = buffer[-config.replay_cap:]
        validity = successes / config.episodes_per_epoch
        if buffer:
            inputs = np.stack([e.inputs for e in buffer])
            tf = np.stack([e.target_f for e in buffer])
            tx = np.stack([e.target_x for e in buffer])
            loss = policy.fit_epoch(inputs, tf, tx, config.batch_size,
                                    config.learning_rate, rng)
        else:
            loss = float("nan")
        log.append({"epoch": epoch, "loss": loss, "validity": validity})
    return policy, log
