"""Linear structural-causal cost model.

Each feature has a cost node; directed edges make the cost of changing a
feature depend on the values of its parents. The weight vector stacks the
node weights (by schema index) followed by the edge weights (edges sorted
lexicographically by (src, dst)). The raw cost of applying an action is

    w_node[target] * (new - old) + sum over parents p of w_edge[p->target] * s[p]

evaluated in the state where the action is taken, then clamped at a
nonnegative floor: change costs model effort.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .actions import Action, Intervention, PreconditionError, replay_states
from .schema import State


@dataclass(frozen=True)
class CausalGraph:
    """Directed acyclic graph over feature cost nodes."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    _parents: tuple[tuple[int, ...], ...] = field(init=False, repr=False,
                                                  compare=False, hash=False)

    def __post_init__(self) -> None:
        seen = set()
        for (i, j) in self.edges:
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) has invalid endpoints")
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))
        self._check_acyclic()
        parents: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for (i, j) in self.edges:
            parents[j].append(i)
        object.__setattr__(self, "_parents", tuple(tuple(sorted(p)) for p in parents))

    def _check_acyclic(self) -> None:
        indeg = [0] * self.n_nodes
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for (i, j) in self.edges:
            adj[i].append(j)
            indeg[j] += 1
        queue = [v for v in range(self.n_nodes) if indeg[v] == 0]
        removed = 0
        while queue:
            v = queue.pop()
            removed += 1
            for u in adj[v]:
                indeg[u] -= 1
                if indeg[u] == 0:
                    queue.append(u)
        if removed != self.n_nodes:
            raise ValueError("causal graph contains a cycle")

    @property
    def m(self) -> int:
        """Weight dimension: one per node plus one per edge."""
        return self.n_nodes + len(self.edges)

    def parents(self, node: int) -> tuple[int, ...]:
        return self._parents[node]

    def edge_index(self, src: int, dst: int) -> int:
        """Position of the edge weight inside the weight vector."""
        return self.n_nodes + self.edges.index((src, dst))

    def to_dict(self) -> dict:
        return {"n_nodes": self.n_nodes, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, data) -> "CausalGraph":
        return cls(n_nodes=int(data["n_nodes"]),
                   edges=tuple((int(i), int(j)) for i, j in data["edges"]))


@dataclass(frozen=True)
class ScmWeights:
    """Weight vector over nodes then edges, in canonical order."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("weights must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "_array", arr)

    @classmethod
    def from_array(cls, arr: Sequence[float] | np.ndarray) -> "ScmWeights":
        return cls(values=tuple(float(x) for x in np.asarray(arr, dtype=float)))

    @property
    def array(self) -> np.ndarray:
        return self._array  # type: ignore[attr-defined]

    def __len__(self) -> int:
        return len(self.values)

    def to_dict(self) -> dict:
        return {"values": list(self.values)}


def check_weights(weights: ScmWeights, graph: CausalGraph) -> None:
    if len(weights) != graph.m:
        raise ValueError(f"weight vector has length {len(weights)}, graph needs {graph.m}")


def action_cost_features(action: Action, state: State, graph: CausalGraph) -> np.ndarray:
    """Coefficient vector phi with raw cost = phi . w for this action in this state.

    The target node's coefficient is the value change; each parent edge's
    coefficient is the parent's current (pre-action) value.
    """
    phi = np.zeros(graph.m)
    i = action.target_index
    phi[i] = action.new_value(state) - state.values[i]
    for p in graph.parents(i):
        phi[graph.edge_index(p, i)] += state.values[p]
    return phi


def action_cost(action: Action, state: State, weights: ScmWeights,
                graph: CausalGraph, *, clamp: bool = True, floor: float = 0.0) -> float:
    """Cost of one action; clamped at `floor` unless `clamp` is disabled."""
    check_weights(weights, graph)
    if not action.precondition.holds(state):
        raise PreconditionError(
            f"action ({action.function_id}, {action.argument:g}): precondition fails")
    action.apply(state)  # validates the post-change domain
    raw = float(action_cost_features(action, state, graph) @ weights.array)
    return max(floor, raw) if clamp else raw


def intervention_cost_features(intervention: Intervention, state: State,
                               graph: CausalGraph) -> np.ndarray:
    """Per-step coefficient matrix (T, m) along the replayed trajectory."""
    states = replay_states(intervention, state)
    if not intervention.actions:
        return np.zeros((0, graph.m))
    return np.stack([action_cost_features(a, s, graph)
                     for a, s in zip(intervention.actions, states[:-1])])


def intervention_cost(intervention: Intervention, state: State, weights: ScmWeights,
                      graph: CausalGraph, *, clamp: bool = True, floor: float = 0.0) -> float:
    """Sum of per-step action costs on the sequentially updated state.

    Accumulates in trajectory order so the result equals summing
    `action_cost` over the replayed states exactly, not just approximately.
    """
    check_weights(weights, graph)
    states = replay_states(intervention, state)
    total = 0.0
    for action, s in zip(intervention.actions, states[:-1]):
        raw = float(action_cost_features(action, s, graph) @ weights.array)
        total += max(floor, raw) if clamp else raw
    return total


def costs_over_particles(phi: np.ndarray, particles: np.ndarray,
                         *, floor: float = 0.0) -> np.ndarray:
    """Intervention cost under every particle, from a (T, m) coefficient matrix.

    Returns an (n,) vector: per-step costs are clamped at `floor` before
    summation, matching the scalar path exactly.
    """
    if phi.shape[0] == 0:
        return np.zeros(particles.shape[0])
    per_step = phi @ particles.T  # (T, n)
    return np.maximum(floor, per_step).sum(axis=0)
