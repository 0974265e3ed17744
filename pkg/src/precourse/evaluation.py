"""Simulated users, evaluation metrics, and the experiment runner.

Ground-truth weights come from the dataset's generative mixture; users
answer choice queries noiselessly or through the softmax response model.
Regret compares each recommendation's true-weight cost against an
exhaustive oracle's best (and worst, for normalization) successful
intervention. The runner sweeps (q, k, response model) grids and emits
deterministic CSV artifacts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .belief import MixturePrior
from .core.actions import Intervention, feasible_actions
from .core.classifier import Classifier
from .core.schema import State
from .core.scm import CausalGraph, ScmWeights, intervention_cost
from .dataset import Problem, sample_population
from .elicit import ChoiceSet, SessionConfig, final_intervention, run_scripted_session
from .generator.base import GenerationResult, RecourseGenerator, stable_seed


def sample_true_weights(mixture: MixturePrior, n_users: int, seed: int) -> list[ScmWeights]:
    rng = np.random.default_rng(seed)
    return [ScmWeights.from_array(w) for w in mixture.sample(n_users, rng)]


@dataclass(frozen=True)
class SimulatedUser:
    """Answers choice queries according to true weights and a response model."""

    true_weights: ScmWeights
    response_model: str  # "noiseless" | "logistic"
    lam_temp: float = 5.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.response_model not in ("noiseless", "logistic"):
            raise ValueError(f"unknown response model {self.response_model!r}")

    def respond(self, choice_set: ChoiceSet, graph: CausalGraph) -> int:
        """Chosen index; randomness (tie breaks, softmax draws) is a pure
        function of the set contents, the weights, the model, and the seed."""
        costs = np.array([intervention_cost(c.intervention, choice_set.state,
                                            self.true_weights, graph)
                          for c in choice_set.items])
        signature = tuple(c.intervention.keys() for c in choice_set.items)
        rng = np.random.default_rng(stable_seed(
            "respond", self.seed, self.response_model, signature,
            tuple(choice_set.state.values)))
        if self.response_model == "noiseless":
            winners = np.flatnonzero(costs == costs.min())
            return int(winners[rng.integers(len(winners))])
        utilities = -self.lam_temp * costs
        utilities -= utilities.max()
        probs = np.exp(utilities)
        probs /= probs.sum()
        return int(rng.choice(len(costs), p=probs))


def validity(successes: Sequence[bool]) -> float:
    if not successes:
        return 0.0
    return sum(bool(s) for s in successes) / len(successes)


@dataclass(frozen=True)
class OracleRange:
    """Cost extremes over all successful interventions up to a horizon."""

    best: Intervention
    best_cost: float
    worst: Intervention
    worst_cost: float

    @property
    def degenerate(self) -> bool:
        return self.worst_cost - self.best_cost <= 1e-12


def oracle_cost_range(state: State, catalog, classifier: Classifier,
                      weights: ScmWeights, graph: CausalGraph,
                      t_max: int) -> OracleRange | None:
    """Exhaustive search over feasible sequences; None when no sequence up to
    t_max achieves recourse."""
    base = classifier.predict(state)
    best = worst = None
    best_cost, worst_cost = math.inf, -math.inf
    stack = [(state, Intervention(), 0.0)]
    while stack:
        current, so_far, cost = stack.pop()
        if len(so_far) > 0 and classifier.predict(current) != base:
            if cost < best_cost:
                best, best_cost = so_far, cost
            if cost > worst_cost:
                worst, worst_cost = so_far, cost
            continue  # extensions of a success only add nonnegative cost
        if len(so_far) >= t_max:
            continue
        for action in feasible_actions(current, catalog):
            step = intervention_cost(Intervention((action,)), current, weights, graph)
            stack.append((action.apply(current), so_far.append(action), cost + step))
    if best is None:
        return None
    return OracleRange(best=best, best_cost=best_cost, worst=worst, worst_cost=worst_cost)


def average_regret(recommended_costs: Sequence[float],
                   best_costs: Sequence[float]) -> float:
    """Mean excess cost of the recommendations over the oracle optimum."""
    if len(recommended_costs) != len(best_costs):
        raise ValueError("cost lists must align")
    if not recommended_costs:
        return 0.0
    return float(np.mean([c - b for c, b in zip(recommended_costs, best_costs)]))


def normalized_regret(cost: float, best_cost: float, worst_cost: float) -> float:
    """Per-user regret scaled into [0, 1] by the oracle's cost range;
    degenerate ranges (single successful cost) report 0."""
    span = worst_cost - best_cost
    if span <= 1e-12:
        return 0.0
    return float(min(1.0, max(0.0, (cost - best_cost) / span)))


def _lcs_length(a: Sequence, b: Sequence) -> int:
    n, m = len(a), len(b)
    dp = np.zeros((n + 1, m + 1), dtype=int)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                dp[i, j] = dp[i - 1, j - 1] + 1
            else:
                dp[i, j] = max(dp[i - 1, j], dp[i, j - 1])
    return int(dp[n, m])


def sequence_similarity(intervention: Intervention, optimal: Intervention) -> float:
    """Longest-common-subsequence overlap of (function, argument) tuples,
    normalized by the longer sequence; two empty sequences count as 1."""
    a, b = list(intervention.keys()), list(optimal.keys())
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    return _lcs_length(a, b) / max(len(a), len(b))


def error_taxonomy(intervention: Intervention, optimal: Intervention) -> dict[str, int]:
    """Counts of extra actions, wrong arguments at matching positions, and
    order inversions among shared actions."""
    a, b = list(intervention.keys()), list(optimal.keys())
    extra = len(a) - _lcs_length(a, b)
    wrong_action = sum(1 for x, y in zip(a, b) if x[0] == y[0] and x[1] != y[1])
    shared = [k for k in dict.fromkeys(a) if k in b]
    pos_a = {k: a.index(k) for k in shared}
    pos_b = {k: b.index(k) for k in shared}
    wrong_order = 0
    for i, ki in enumerate(shared):
        for kj in shared[i + 1:]:
            if (pos_a[ki] - pos_a[kj]) * (pos_b[ki] - pos_b[kj]) < 0:
                wrong_order += 1
    return {"extra": max(0, extra), "wrong_action": wrong_action,
            "wrong_order": wrong_order}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    q_grid: tuple[int, ...] = (1, 10)
    k_grid: tuple[int, ...] = (2, 4)
    response_models: tuple[str, ...] = ("logistic",)
    n_users: int = 50
    seed: int = 0
    generator_name: str = "wfare"
    oracle_t_max: int = 4

    def __post_init__(self) -> None:
        if any(q < 0 for q in self.q_grid) or self.n_users < 1:
            raise ValueError("q grid must be nonnegative and users >= 1")


@dataclass
class UserRun:
    user: int
    q: int
    k: int
    model: str
    intervention: Intervention
    success: bool
    transcript: list

    def to_dict(self) -> dict:
        return {"user": self.user, "q": self.q, "k": self.k, "model": self.model,
                "intervention": [list(key) for key in self.intervention.keys()],
                "success": self.success, "transcript": self.transcript}


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    problem: Problem
    states: list[State]
    true_weights: list[ScmWeights]
    oracle_ranges: list[OracleRange | None]
    runs: list[UserRun] = field(default_factory=list)

    @property
    def oracle_failures(self) -> int:
        return sum(r is None for r in self.oracle_ranges)


def run_experiment(problem: Problem, generator: RecourseGenerator,
                   config: ExperimentConfig,
                   states: list[State] | None = None,
                   true_weights: list[ScmWeights] | None = None) -> ExperimentResult:
    """Full elicitation sessions per user per (q, k, response model)."""
    if true_weights is None:
        if problem.true_mixture is None:
            raise ValueError("dataset config declares no true-weight mixture")
        true_weights = sample_true_weights(problem.true_mixture, config.n_users,
                                           stable_seed("true-w", config.seed))
    if states is None:
        states = sample_population(problem, config.n_users,
                                   stable_seed("users", config.seed))
    oracle_ranges = [
        oracle_cost_range(s, problem.catalog, problem.classifier, w,
                          problem.graph, config.oracle_t_max)
        for s, w in zip(states, true_weights)]

    result = ExperimentResult(config=config, problem=problem, states=states,
                              true_weights=true_weights, oracle_ranges=oracle_ranges)
    for model in config.response_models:
        for k in config.k_grid:
            for q in config.q_grid:
                for i, (s0, w_true) in enumerate(zip(states, true_weights)):
                    user = SimulatedUser(true_weights=w_true, response_model=model,
                                         lam_temp=problem.lam_temp,
                                         seed=stable_seed("user", config.seed, i))
                    session_cfg = SessionConfig(
                        q=q, k=k,
                        seed=stable_seed("session", config.seed, i, q, k, model))
                    session = run_scripted_session(
                        problem, generator, s0, session_cfg,
                        respond=lambda cs: user.respond(cs, problem.graph))
                    final: GenerationResult = final_intervention(session)
                    result.runs.append(UserRun(
                        user=i, q=q, k=k, model=model,
                        intervention=final.intervention, success=final.success,
                        transcript=list(session.transcript)))
    return result


def metrics_rows(result: ExperimentResult) -> list[dict]:
    """One row per (model, k, q) with validity, regrets, similarity."""
    rows = []
    cfg = result.config
    for model in cfg.response_models:
        for k in cfg.k_grid:
            for q in cfg.q_grid:
                runs = [r for r in result.runs
                        if r.model == model and r.k == k and r.q == q]
                successes = [r.success for r in runs]
                regrets, norm_regrets, sims = [], [], []
                taxonomy = {"extra": 0, "wrong_action": 0, "wrong_order": 0}
                degenerate = excluded = 0
                for r in runs:
                    rng_range = result.oracle_ranges[r.user]
                    if rng_range is None or not r.success:
                        excluded += 1
                        continue
                    cost = intervention_cost(r.intervention, result.states[r.user],
                                             result.true_weights[r.user],
                                             result.problem.graph)
                    regrets.append(cost - rng_range.best_cost)
                    norm_regrets.append(normalized_regret(
                        cost, rng_range.best_cost, rng_range.worst_cost))
                    degenerate += rng_range.degenerate
                    sims.append(sequence_similarity(r.intervention, rng_range.best))
                    for key, value in error_taxonomy(r.intervention,
                                                     rng_range.best).items():
                        taxonomy[key] += value
                norm = np.asarray(norm_regrets) if norm_regrets else np.zeros(1)
                se = float(norm.std(ddof=1) / math.sqrt(len(norm))) if len(norm) > 1 else 0.0
                rows.append({
                    "dataset": result.problem.name,
                    "generator": cfg.generator_name,
                    "noise": model, "k": k, "q": q,
                    "validity": validity(successes),
                    "mean_regret": float(np.mean(regrets)) if regrets else float("nan"),
                    "mean_norm_regret": float(norm.mean()),
                    "ci_low": float(norm.mean() - 1.96 * se),
                    "ci_high": float(norm.mean() + 1.96 * se),
                    "se_norm_regret": se,
                    "mean_similarity": float(np.mean(sims)) if sims else float("nan"),
                    "extra": taxonomy["extra"],
                    "wrong_action": taxonomy["wrong_action"],
                    "wrong_order": taxonomy["wrong_order"],
                    "excluded": excluded,
                    "degenerate_oracle": degenerate,
                })
    return rows


def summary_rows(result: ExperimentResult) -> list[dict]:
    """Regret-improvement summary (1 - normalized regret) at the smallest and
    largest question budgets."""
    rows = []
    cfg = result.config
    q_lo, q_hi = min(cfg.q_grid), max(cfg.q_grid)
    table = {(r["noise"], r["k"], r["q"]): r for r in metrics_rows(result)}
    for model in cfg.response_models:
        for k in cfg.k_grid:
            lo = table[(model, k, q_lo)]
            hi = table[(model, k, q_hi)]
            rows.append({
                "dataset": result.problem.name,
                "generator": cfg.generator_name,
                "noise": model, "k": k,
                "q_lo": q_lo, "q_hi": q_hi,
                "improvement_q_lo": 1.0 - lo["mean_norm_regret"],
                "improvement_q_hi": 1.0 - hi["mean_norm_regret"],
                "se_q_lo": lo["se_norm_regret"],
                "se_q_hi": hi["se_norm_regret"],
            })
    return rows


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("no rows to write")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_cell(v) for k, v in row.items()})
    tmp.replace(path)


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_reports(result: ExperimentResult, out_dir: str | Path) -> dict[str, Path]:
    """curves.csv, summary.csv, errors.csv under out_dir; write-then-rename."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = metrics_rows(result)
    curves = [{k: r[k] for k in ("dataset", "generator", "noise", "k", "q",
                                 "validity", "mean_norm_regret", "ci_low",
                                 "ci_high", "mean_similarity")} for r in rows]
    errors = [{k: r[k] for k in ("dataset", "generator", "noise", "k", "q",
                                 "extra", "wrong_action", "wrong_order",
                                 "excluded")} for r in rows]
    paths = {"curves": out / "curves.csv", "summary": out / "summary.csv",
             "errors": out / "errors.csv"}
    _write_csv(paths["curves"], curves)
    _write_csv(paths["summary"], summary_rows(result))
    _write_csv(paths["errors"], errors)
    return paths
