"""Actions, preconditions, catalogs and interventions.

An action is a (function, argument) pair targeting one feature. Functions
declare a finite argument grid and a precondition; the catalog expands
functions x grids into a fixed, ordered action list that serves as the
tie-break order everywhere a deterministic ordering is needed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .schema import CategoricalFeature, DomainError, FeatureSchema, State

_OPS = ("<=", ">=", "==", "<", ">", "=", "in")
_CLAUSE_RE = re.compile(r"^\s*(\w+)\s*(<=|>=|==|<|>|=|in)\s*(.+?)\s*$")


class PreconditionError(ValueError):
    """An action was applied in a state where its precondition fails."""


@dataclass(frozen=True)
class Clause:
    feature: str
    op: str
    literal: tuple[float, ...]  # singleton except for `in`

    def holds(self, state: State) -> bool:
        v = state[self.feature]
        if self.op == "in":
            return any(abs(v - x) < 1e-12 for x in self.literal)
        x = self.literal[0]
        if self.op in ("=", "=="):
            return abs(v - x) < 1e-12
        if self.op == "<":
            return v < x
        if self.op == "<=":
            return v <= x + 1e-12
        if self.op == ">":
            return v > x
        if self.op == ">=":
            return v >= x - 1e-12
        raise ValueError(f"unknown operator {self.op!r}")

    def render(self, schema: FeatureSchema) -> str:
        f = schema.feature(self.feature)
        if self.op == "in":
            if isinstance(f, CategoricalFeature):
                vals = ", ".join(f.levels[int(x)] for x in self.literal)
            else:
                vals = ", ".join(_fmt(x) for x in self.literal)
            return f"{self.feature} in [{vals}]"
        x = self.literal[0]
        if isinstance(f, CategoricalFeature) and self.op in ("=", "=="):
            return f"{self.feature} = {f.levels[int(x)]}"
        return f"{self.feature} {self.op} {_fmt(x)}"


def _fmt(x: float) -> str:
    return f"{x:g}"


@dataclass(frozen=True)
class Precondition:
    """Conjunction of per-feature range/level tests."""

    clauses: tuple[Clause, ...] = ()

    def holds(self, state: State) -> bool:
        return all(c.holds(state) for c in self.clauses)

    def render(self, schema: FeatureSchema) -> str:
        if not self.clauses:
            return "true"
        return " and ".join(c.render(schema) for c in self.clauses)

    def to_text(self) -> str:
        if not self.clauses:
            return ""
        parts = []
        for c in self.clauses:
            if c.op == "in":
                parts.append(f"{c.feature} in [{', '.join(_fmt(x) for x in c.literal)}]")
            else:
                parts.append(f"{c.feature} {c.op} {_fmt(c.literal[0])}")
        return " and ".join(parts)


def parse_precondition(text: str, schema: FeatureSchema) -> Precondition:
    """Parse `feature OP literal [and ...]` with OP in {<, <=, =, >=, >, in}.

    Categorical literals may be level names; `in` takes a bracketed list.
    """
    text = text.strip()
    if not text or text.lower() == "true":
        return Precondition()
    clauses = []
    for chunk in re.split(r"\s+and\s+", text):
        m = _CLAUSE_RE.match(chunk)
        if not m:
            raise ValueError(f"cannot parse precondition clause {chunk!r}")
        name, op, lit = m.groups()
        feat = schema.feature(name)  # raises on unknown feature
        if op == "in":
            body = lit.strip()
            if not (body.startswith("[") and body.endswith("]")):
                raise ValueError(f"`in` literal must be a [list]: {chunk!r}")
            raw_items = [s.strip() for s in body[1:-1].split(",") if s.strip()]
            values = tuple(_parse_literal(r, feat) for r in raw_items)
            if not values:
                raise ValueError(f"empty `in` list: {chunk!r}")
        else:
            values = (_parse_literal(lit, feat),)
        clauses.append(Clause(feature=name, op=op, literal=values))
    return Precondition(clauses=tuple(clauses))


def _parse_literal(raw: str, feat) -> float:
    raw = raw.strip().strip("'\"")
    if isinstance(feat, CategoricalFeature):
        try:
            return float(raw)
        except ValueError:
            return float(feat.level_index(raw))
    return float(raw)


@dataclass(frozen=True)
class ActionFunction:
    """A named feature-changing function with a finite argument grid.

    mode `add` shifts a numeric feature by the argument; mode `set` writes
    the argument (a level index for categoricals) directly.
    """

    id: str
    target: str
    mode: str  # "add" | "set"
    grid: tuple[float, ...]
    precondition: Precondition = Precondition()

    def __post_init__(self) -> None:
        if self.mode not in ("add", "set"):
            raise ValueError(f"function {self.id!r}: mode must be add or set")
        if not self.grid:
            raise ValueError(f"function {self.id!r}: empty argument grid")
        if len(set(self.grid)) != len(self.grid):
            raise ValueError(f"function {self.id!r}: duplicate grid arguments")
        if self.mode == "add" and any(x == 0 for x in self.grid):
            raise ValueError(f"function {self.id!r}: zero delta is a no-op")


@dataclass(frozen=True)
class Action:
    """One (function, argument) pair bound to a schema index."""

    function_id: str
    argument: float
    target_index: int
    target: str
    mode: str
    precondition: Precondition

    def new_value(self, state: State) -> float:
        old = state.values[self.target_index]
        return old + self.argument if self.mode == "add" else self.argument

    def feasible(self, state: State) -> bool:
        """Precondition holds, result stays in-domain, and the value changes."""
        if not self.precondition.holds(state):
            return False
        new = self.new_value(state)
        feat = state.schema.features[self.target_index]
        if not feat.contains(new):
            return False
        return abs(new - state.values[self.target_index]) > 1e-12

    def apply(self, state: State) -> State:
        if not self.precondition.holds(state):
            raise PreconditionError(
                f"action ({self.function_id}, {_fmt(self.argument)}): precondition fails")
        new = self.new_value(state)
        feat = state.schema.features[self.target_index]
        if not feat.contains(new):
            raise DomainError(
                f"action ({self.function_id}, {_fmt(self.argument)}): "
                f"{self.target} -> {new!r} leaves the domain")
        if abs(new - state.values[self.target_index]) <= 1e-12:
            raise PreconditionError(
                f"action ({self.function_id}, {_fmt(self.argument)}): no-op on {self.target}")
        return state.replace(self.target_index, new)

    def key(self) -> tuple[str, float]:
        return (self.function_id, self.argument)

    def describe(self, state: State) -> str:
        feat = state.schema.features[self.target_index]
        new = self.new_value(state)
        if isinstance(feat, CategoricalFeature):
            return f"set {self.target} to {feat.levels[int(new)]}"
        if self.mode == "add":
            verb = "increase" if self.argument > 0 else "decrease"
            return f"{verb} {self.target} by {_fmt(abs(self.argument))}"
        return f"set {self.target} to {_fmt(new)}"

    def to_dict(self) -> dict:
        return {"function": self.function_id, "argument": self.argument}


@dataclass(frozen=True)
class ActionCatalog:
    """Ordered action universe: functions expanded over their grids."""

    functions: tuple[ActionFunction, ...]
    schema: FeatureSchema

    def __post_init__(self) -> None:
        ids = [f.id for f in self.functions]
        if len(set(ids)) != len(ids):
            raise ValueError("function ids must be unique")
        for f in self.functions:
            self.schema.index(f.target)  # raises on unknown target

    @property
    def actions(self) -> tuple[Action, ...]:
        out = []
        for f in self.functions:
            idx = self.schema.index(f.target)
            for x in f.grid:
                out.append(Action(function_id=f.id, argument=x, target_index=idx,
                                  target=f.target, mode=f.mode,
                                  precondition=f.precondition))
        return tuple(out)

    def function(self, function_id: str) -> ActionFunction:
        for f in self.functions:
            if f.id == function_id:
                return f
        raise KeyError(f"unknown function {function_id!r}")

    def function_ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self.functions)

    def action(self, function_id: str, argument: float) -> Action:
        f = self.function(function_id)
        for x in f.grid:
            if abs(x - argument) < 1e-12:
                idx = self.schema.index(f.target)
                return Action(function_id=f.id, argument=x, target_index=idx,
                              target=f.target, mode=f.mode, precondition=f.precondition)
        raise KeyError(f"argument {argument!r} not on grid of {function_id!r}")

    def max_grid_size(self) -> int:
        return max(len(f.grid) for f in self.functions)


@dataclass(frozen=True)
class Intervention:
    """An ordered, possibly empty action sequence."""

    actions: tuple[Action, ...] = ()

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def append(self, action: Action) -> "Intervention":
        return Intervention(actions=self.actions + (action,))

    def keys(self) -> tuple[tuple[str, float], ...]:
        return tuple(a.key() for a in self.actions)

    def to_dict(self) -> dict:
        return {"actions": [a.to_dict() for a in self.actions]}


def apply_intervention(intervention: Intervention, state: State) -> State:
    """Apply each action sequentially; raises if any step is inapplicable."""
    for t, action in enumerate(intervention.actions):
        try:
            state = action.apply(state)
        except (PreconditionError, DomainError) as exc:
            raise PreconditionError(f"step {t}: {exc}") from exc
    return state


def replay_states(intervention: Intervention, state: State) -> list[State]:
    """States visited while applying the intervention, initial one included."""
    states = [state]
    for t, action in enumerate(intervention.actions):
        try:
            state = action.apply(state)
        except (PreconditionError, DomainError) as exc:
            raise PreconditionError(f"step {t}: {exc}") from exc
        states.append(state)
    return states


def is_applicable(intervention: Intervention, state: State) -> bool:
    try:
        apply_intervention(intervention, state)
        return True
    except (PreconditionError, DomainError):
        return False


def feasible_actions(state: State, catalog: ActionCatalog | Sequence[Action]) -> list[Action]:
    """Catalog actions applicable in `state`, in catalog order."""
    actions: Iterable[Action]
    actions = catalog.actions if isinstance(catalog, ActionCatalog) else catalog
    return [a for a in actions if a.feasible(state)]
