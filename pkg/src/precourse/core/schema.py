"""Feature schemas and user states.

A schema is an ordered list of features, each either categorical (finite
level set) or numeric (bounded range with a step grid). States are
immutable vectors aligned to the schema: categorical entries hold level
indices, numeric entries hold reals inside the declared range.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping


class DomainError(ValueError):
    """A value falls outside its feature's declared domain."""


@dataclass(frozen=True)
class CategoricalFeature:
    name: str
    levels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError(f"feature {self.name!r}: empty level set")
        if len(set(self.levels)) != len(self.levels):
            raise ValueError(f"feature {self.name!r}: duplicate levels")

    @property
    def kind(self) -> str:
        return "categorical"

    def contains(self, value: float) -> bool:
        return float(value).is_integer() and 0 <= int(value) < len(self.levels)

    def level_index(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise DomainError(f"feature {self.name!r}: unknown level {level!r}") from None

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": "categorical", "levels": list(self.levels)}


@dataclass(frozen=True)
class NumericFeature:
    name: str
    min: float
    max: float
    step: float

    def __post_init__(self) -> None:
        if not self.min < self.max:
            raise ValueError(f"feature {self.name!r}: min must be < max")
        if self.step <= 0:
            raise ValueError(f"feature {self.name!r}: step must be positive")

    @property
    def kind(self) -> str:
        return "numeric"

    def contains(self, value: float) -> bool:
        return self.min <= float(value) <= self.max

    def grid(self) -> tuple[float, ...]:
        """All on-step values inside [min, max], inclusive."""
        values = []
        k = 0
        while True:
            v = self.min + k * self.step
            if v > self.max + 1e-12:
                break
            values.append(round(v, 12))
            k += 1
        return tuple(values)

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": "numeric", "min": self.min,
                "max": self.max, "step": self.step}


Feature = CategoricalFeature | NumericFeature


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self) -> int:
        return len(self.features)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown feature {name!r}") from None

    def feature(self, name: str) -> Feature:
        return self.features[self.index(name)]

    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def state(self, values: Iterable[float]) -> "State":
        return State(schema=self, values=tuple(float(v) for v in values))

    def state_from_mapping(self, mapping: Mapping[str, object]) -> "State":
        """Build a state from {feature name: value}; categorical values may be
        given as level names or indices."""
        values: list[float] = []
        for f in self.features:
            if f.name not in mapping:
                raise DomainError(f"missing feature {f.name!r}")
            raw = mapping[f.name]
            if isinstance(f, CategoricalFeature) and isinstance(raw, str):
                values.append(float(f.level_index(raw)))
            else:
                values.append(float(raw))  # type: ignore[arg-type]
        return self.state(values)

    def to_dict(self) -> dict:
        return {"features": [f.to_dict() for f in self.features]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "FeatureSchema":
        feats: list[Feature] = []
        for fd in data["features"]:
            if fd["kind"] == "categorical":
                feats.append(CategoricalFeature(fd["name"], tuple(fd["levels"])))
            elif fd["kind"] == "numeric":
                feats.append(NumericFeature(fd["name"], float(fd["min"]),
                                            float(fd["max"]), float(fd["step"])))
            else:
                raise ValueError(f"unknown feature kind {fd['kind']!r}")
        return cls(features=tuple(feats))

    def content_hash(self) -> str:
        """Stable hash used to bind trained artifacts to a schema."""
        payload = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class State:
    """A user's feature vector. Categorical entries are level indices."""

    schema: FeatureSchema
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.schema):
            raise DomainError(
                f"state has {len(self.values)} values, schema has {len(self.schema)}")
        for f, v in zip(self.schema.features, self.values):
            if not f.contains(v):
                raise DomainError(f"feature {f.name!r}: value {v!r} out of domain")

    def __getitem__(self, name: str) -> float:
        return self.values[self.schema.index(name)]

    def replace(self, index: int, value: float) -> "State":
        vals = list(self.values)
        vals[index] = float(value)
        return State(schema=self.schema, values=tuple(vals))

    def as_mapping(self) -> dict[str, float]:
        return {f.name: v for f, v in zip(self.schema.features, self.values)}

    def pretty(self) -> dict[str, object]:
        """Human-readable mapping: categorical indices become level names."""
        out: dict[str, object] = {}
        for f, v in zip(self.schema.features, self.values):
            if isinstance(f, CategoricalFeature):
                out[f.name] = f.levels[int(v)]
            else:
                out[f.name] = v
        return out
