"""Black-box binary classifiers over states.

Two implementations: a declarative rule classifier (disjunction of
conjunctive feature tests) and a logistic model trained by gradient
descent on standardized/one-hot encoded features. Both are deterministic:
a state always maps to the same label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .actions import Intervention, Precondition, apply_intervention, parse_precondition
from .schema import CategoricalFeature, FeatureSchema, NumericFeature, State


class Classifier:
    def predict(self, state: State) -> int:
        raise NotImplementedError


def achieves_recourse(intervention: Intervention, state: State, classifier: Classifier) -> bool:
    """True iff applying the intervention flips the classifier's label."""
    final = apply_intervention(intervention, state)
    return classifier.predict(final) != classifier.predict(state)


@dataclass(frozen=True)
class RuleClassifier(Classifier):
    """Labels 1 iff any rule (a conjunction of feature tests) is satisfied."""

    rules: tuple[Precondition, ...]

    def predict(self, state: State) -> int:
        return 1 if any(r.holds(state) for r in self.rules) else 0

    @classmethod
    def from_texts(cls, texts: Sequence[str], schema: FeatureSchema) -> "RuleClassifier":
        return cls(rules=tuple(parse_precondition(t, schema) for t in texts))

    def to_dict(self) -> dict:
        return {"kind": "rule", "rules": [r.to_text() for r in self.rules]}


@dataclass(frozen=True)
class StateEncoder:
    """Standardizes numerics (stored mean/stdev) and one-hot encodes categoricals."""

    schema: FeatureSchema
    means: tuple[float, ...]
    stdevs: tuple[float, ...]

    @property
    def dim(self) -> int:
        total = 0
        for f in self.schema.features:
            total += len(f.levels) if isinstance(f, CategoricalFeature) else 1
        return total

    def encode(self, state: State) -> np.ndarray:
        parts: list[np.ndarray] = []
        for i, f in enumerate(self.schema.features):
            v = state.values[i]
            if isinstance(f, CategoricalFeature):
                onehot = np.zeros(len(f.levels))
                onehot[int(v)] = 1.0
                parts.append(onehot)
            else:
                parts.append(np.array([(v - self.means[i]) / self.stdevs[i]]))
        return np.concatenate(parts)

    def encode_batch(self, states: Sequence[State]) -> np.ndarray:
        return np.stack([self.encode(s) for s in states])

    @classmethod
    def fit(cls, schema: FeatureSchema, states: Sequence[State]) -> "StateEncoder":
        raw = np.array([s.values for s in states])
        means, stdevs = [], []
        for i, f in enumerate(schema.features):
            if isinstance(f, NumericFeature):
                mu = float(raw[:, i].mean())
                sd = float(raw[:, i].std())
                means.append(mu)
                stdevs.append(sd if sd > 1e-9 else 1.0)
            else:
                means.append(0.0)
                stdevs.append(1.0)
        return cls(schema=schema, means=tuple(means), stdevs=tuple(stdevs))

    @classmethod
    def from_domain(cls, schema: FeatureSchema) -> "StateEncoder":
        """Domain-derived scaling when no sample is available: midpoint and
        half-range of each numeric feature."""
        means, stdevs = [], []
        for f in schema.features:
            if isinstance(f, NumericFeature):
                means.append((f.min + f.max) / 2.0)
                stdevs.append(max((f.max - f.min) / 2.0, 1e-9))
            else:
                means.append(0.0)
                stdevs.append(1.0)
        return cls(schema=schema, means=tuple(means), stdevs=tuple(stdevs))

    def to_dict(self) -> dict:
        return {"means": list(self.means), "stdevs": list(self.stdevs)}


@dataclass(frozen=True)
class LogisticClassifier(Classifier):
    """Thresholded linear model on encoded features."""

    encoder: StateEncoder
    coef: tuple[float, ...]
    bias: float
    training_accuracy: float = float("nan")
    _coef_arr: np.ndarray = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.coef, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "_coef_arr", arr)

    def decision_value(self, state: State) -> float:
        return float(self.encoder.encode(state) @ self._coef_arr + self.bias)

    def predict(self, state: State) -> int:
        return 1 if self.decision_value(state) >= 0.0 else 0

    def to_dict(self) -> dict:
        return {"kind": "logistic", "coef": list(self.coef), "bias": self.bias,
                "encoder": self.encoder.to_dict(),
                "training_accuracy": self.training_accuracy}


class DegenerateDataError(ValueError):
    """Training data contains a single class."""


def train_logistic_classifier(states: Sequence[State], labels: Sequence[int],
                              *, epochs: int = 400, lr: float = 0.5,
                              l2: float = 1e-4) -> LogisticClassifier:
    """Full-batch gradient descent on the logistic loss. Deterministic."""
    if len(states) != len(labels) or not states:
        raise ValueError("states and labels must be non-empty and aligned")
    y = np.asarray(labels, dtype=float)
    if len(set(labels)) < 2:
        raise DegenerateDataError("training data contains a single class")
    schema = states[0].schema
    encoder = StateEncoder.fit(schema, states)
    X = encoder.encode_batch(states)
    n, d = X.shape
    coef = np.zeros(d)
    bias = 0.0
    for _ in range(epochs):
        z = X @ coef + bias
        p = 1.0 / (1.0 + np.exp(-z))
        grad_z = (p - y) / n
        coef -= lr * (X.T @ grad_z + l2 * coef)
        bias -= lr * float(grad_z.sum())
    pred = (X @ coef + bias >= 0.0).astype(int)
    acc = float((pred == y.astype(int)).mean())
    return LogisticClassifier(encoder=encoder, coef=tuple(coef), bias=bias,
                              training_accuracy=acc)


def classifier_from_dict(data: Mapping, schema: FeatureSchema) -> Classifier:
    if data["kind"] == "rule":
        return RuleClassifier.from_texts(list(data["rules"]), schema)
    if data["kind"] == "logistic":
        enc = data["encoder"]
        encoder = StateEncoder(schema=schema, means=tuple(enc["means"]),
                               stdevs=tuple(enc["stdevs"]))
        return LogisticClassifier(encoder=encoder, coef=tuple(data["coef"]),
                                  bias=float(data["bias"]),
                                  training_accuracy=float(data.get("training_accuracy",
                                                                   float("nan"))))
    raise ValueError(f"unknown classifier kind {data['kind']!r}")
