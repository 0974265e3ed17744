"""Dataset configuration documents and problem bundles.

One YAML document per dataset declares the feature schema, the action
catalog (with precondition expressions), the causal edges, the prior
mixture over cost weights, the classifier, and optional simulation
settings (true-weight mixture, population ranges, generator/sampler
knobs). This module parses those documents into a `Problem` bundle that
the rest of the library consumes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .belief import MixturePrior
from .core.actions import ActionCatalog, ActionFunction, feasible_actions, parse_precondition
from .core.classifier import Classifier, classifier_from_dict
from .core.schema import CategoricalFeature, FeatureSchema, NumericFeature, State
from .core.scm import CausalGraph
from .generator.mcts import GeneratorConfig

DEFAULT_LAMBDA_TEMP = 5.0


@dataclass(frozen=True)
class SamplerSettings:
    n_walkers: int = 32
    n_steps: int = 500
    burn_in: float = 0.5
    stretch: float = 2.0
    n_keep: int = 1000

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SamplerSettings":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass(frozen=True)
class PopulationSpec:
    """How simulated users' initial states are drawn: uniform over each
    feature's domain (optionally restricted), then filtered by label."""

    filter_label: int = 0
    ranges: Mapping[str, tuple[float, float]] | None = None


@dataclass(frozen=True)
class Problem:
    name: str
    schema: FeatureSchema
    graph: CausalGraph
    catalog: ActionCatalog
    classifier: Classifier
    prior: MixturePrior
    true_mixture: MixturePrior | None = None
    lam_temp: float = DEFAULT_LAMBDA_TEMP
    generator_config: GeneratorConfig = GeneratorConfig()
    sampler: SamplerSettings = SamplerSettings()
    population: PopulationSpec = PopulationSpec()

    def with_overrides(self, **kwargs) -> "Problem":
        return replace(self, **kwargs)


def _edge_indices(edge, schema: FeatureSchema) -> tuple[int, int]:
    if isinstance(edge, str):
        src, dst = (part.strip() for part in edge.split("->"))
    else:
        src, dst = edge
    return schema.index(str(src)), schema.index(str(dst))


def _vector_from_spec(spec, schema: FeatureSchema, graph: CausalGraph,
                      what: str) -> np.ndarray:
    """A length-m vector from either a plain list or a {default, nodes, edges}
    mapping keyed by feature names / 'src->dst' edge names."""
    m = graph.m
    if isinstance(spec, (list, tuple)):
        vec = np.asarray(spec, dtype=float)
        if vec.shape != (m,):
            raise ValueError(f"{what}: expected length {m}, got {len(vec)}")
        return vec
    if "default" not in spec:
        raise ValueError(f"{what}: mapping form needs a 'default' entry")
    vec = np.full(m, float(spec["default"]))
    nodes = dict(spec.get("nodes") or {})
    edges = dict(spec.get("edges") or {})
    if "default" in nodes:
        vec[:graph.n_nodes] = float(nodes.pop("default"))
    if "default" in edges:
        vec[graph.n_nodes:] = float(edges.pop("default"))
    for name, value in nodes.items():
        vec[schema.index(name)] = float(value)
    for edge_name, value in edges.items():
        src, dst = _edge_indices(edge_name, schema)
        vec[graph.edge_index(src, dst)] = float(value)
    return vec


def mixture_from_config(cfg: Mapping, schema: FeatureSchema,
                        graph: CausalGraph) -> MixturePrior:
    components = cfg["components"]
    weights, means, stdevs = [], [], []
    for comp in components:
        weights.append(float(comp.get("weight", 1.0 / len(components))))
        means.append(tuple(_vector_from_spec(comp["mean"], schema, graph, "mean")))
        stdevs.append(tuple(_vector_from_spec(comp.get("stdev", {"default": 0.5}),
                                              schema, graph, "stdev")))
    return MixturePrior.diagonal(weights, means, stdevs)


def problem_from_mapping(doc: Mapping) -> Problem:
    features: list = []
    for fd in doc["features"]:
        if fd["kind"] == "categorical":
            features.append(CategoricalFeature(fd["name"], tuple(fd["levels"])))
        else:
            features.append(NumericFeature(fd["name"], float(fd["min"]),
                                           float(fd["max"]), float(fd["step"])))
    schema = FeatureSchema(features=tuple(features))

    edges = tuple(_edge_indices(e, schema) for e in doc.get("causal_edges", []))
    graph = CausalGraph(n_nodes=len(schema), edges=edges)

    functions = []
    for ad in doc["actions"]:
        pre = parse_precondition(ad.get("precondition", ""), schema)
        functions.append(ActionFunction(id=ad["id"], target=ad["target"],
                                        mode=ad.get("mode", "add"),
                                        grid=tuple(float(x) for x in ad["grid"]),
                                        precondition=pre))
    catalog = ActionCatalog(functions=tuple(functions), schema=schema)

    classifier = classifier_from_dict(doc["classifier"], schema)
    prior = mixture_from_config(doc["prior"], schema, graph)
    true_mixture = None
    if "true_weights" in doc:
        true_mixture = mixture_from_config(doc["true_weights"], schema, graph)

    gen_cfg = GeneratorConfig.from_mapping(doc.get("generator", {}))
    sampler = SamplerSettings.from_mapping(doc.get("sampler", {}))
    pop_doc = doc.get("population", {})
    ranges = None
    if "ranges" in pop_doc:
        ranges = {k: (float(v[0]), float(v[1])) for k, v in pop_doc["ranges"].items()}
    population = PopulationSpec(filter_label=int(pop_doc.get("filter_label", 0)),
                                ranges=ranges)

    return Problem(name=doc.get("name", "unnamed"), schema=schema, graph=graph,
                   catalog=catalog, classifier=classifier, prior=prior,
                   true_mixture=true_mixture,
                   lam_temp=float(doc.get("lambda_temp", DEFAULT_LAMBDA_TEMP)),
                   generator_config=gen_cfg, sampler=sampler, population=population)


def load_problem(path: str | Path) -> Problem:
    with open(path, "r", encoding="utf-8") as fh:
        return problem_from_mapping(yaml.safe_load(fh))


def builtin_config_path(name: str) -> Path:
    base = resources.files("precourse").joinpath("configs")
    path = Path(str(base.joinpath(f"{name}.yaml")))
    if not path.exists():
        raise FileNotFoundError(f"no built-in dataset config named {name!r}")
    return path


def load_builtin_problem(name: str) -> Problem:
    return load_problem(builtin_config_path(name))


def builtin_config_names() -> list[str]:
    base = Path(str(resources.files("precourse").joinpath("configs")))
    return sorted(p.stem for p in base.glob("*.yaml"))


def sample_population(problem: Problem, n: int, seed: int,
                      *, require_feasible: bool = True,
                      max_tries: int = 200000) -> list[State]:
    """Uniform draws over (optionally restricted) feature domains, filtered to
    the configured label and, by default, to states with feasible actions."""
    rng = np.random.default_rng(seed)
    ranges = problem.population.ranges or {}
    states: list[State] = []
    for _ in range(max_tries):
        if len(states) >= n:
            break
        values = []
        for f in problem.schema.features:
            if isinstance(f, NumericFeature):
                grid = [v for v in f.grid()
                        if f.name not in ranges
                        or ranges[f.name][0] <= v <= ranges[f.name][1]]
                values.append(float(rng.choice(grid)))
            else:
                values.append(float(rng.integers(0, len(f.levels))))
        state = problem.schema.state(values)
        if problem.classifier.predict(state) != problem.population.filter_label:
            continue
        if require_feasible and not feasible_actions(state, problem.catalog):
            continue
        states.append(state)
    if len(states) < n:
        raise RuntimeError(f"could only sample {len(states)}/{n} population states")
    return states


def load_csv_dataset(path: str | Path, schema: FeatureSchema) -> tuple[list[State], list[int]]:
    """CSV with a header matching the schema's feature names plus `label`."""
    states, labels = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(schema.names()) - set(reader.fieldnames or ())
        if missing or "label" not in (reader.fieldnames or ()):
            raise ValueError(f"CSV header must contain {sorted(schema.names())} + ['label']")
        for row in reader:
            states.append(schema.state_from_mapping(row))
            labels.append(int(row["label"]))
    return states, labels


def write_csv_dataset(path: str | Path, schema: FeatureSchema,
                      states: Sequence[State], labels: Sequence[int]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(schema.names()) + ["label"])
        for state, label in zip(states, labels):
            writer.writerow([f"{v:g}" for v in state.values] + [label])
