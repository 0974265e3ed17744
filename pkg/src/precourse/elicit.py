"""Preference elicitation: choice-set construction and the session loop.

Each round builds one candidate intervention per feasible action (the
generator is forced to start with that action), scores candidates by
expected cost over the current particle set, greedily assembles the
choice set that maximizes the noiseless expected utility of selection,
and updates the posterior from the user's pick. The session is an
explicit, resumable state machine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .belief import (
    ChoiceRecord,
    ElicitationDataset,
    ParticleSet,
    point_estimate,
    posterior_sample,
    prior_sample,
)
from .core.actions import Action, Intervention, apply_intervention, feasible_actions
from .core.schema import State
from .core.scm import ScmWeights, costs_over_particles, intervention_cost, intervention_cost_features
from .dataset import Problem
from .generator.base import GenerationResult, RecourseGenerator, stable_seed
from .generator.mcts import NoFeasibleActionError

DEFAULT_FAILURE_PENALTY = 2.0

PHASE_QUERYING = "querying"
PHASE_AWAITING = "awaiting_choice"
PHASE_FINALIZED = "finalized"


class SessionPhaseError(RuntimeError):
    """An operation was attempted in the wrong session phase."""


@dataclass(frozen=True)
class CandidateIntervention:
    """A (first action, full intervention) pair with per-particle cost caches.

    `costs` include the failure padding applied to candidates that do not
    achieve recourse; `raw_costs` are the unpadded values.
    """

    action: Action
    intervention: Intervention
    success: bool
    costs: np.ndarray
    raw_costs: np.ndarray
    rules: tuple = ()

    def __post_init__(self) -> None:
        if len(self.intervention) == 0 or self.intervention.actions[0].key() != self.action.key():
            raise ValueError("candidate intervention must begin with its action")

    @property
    def expected_cost(self) -> float:
        return float(self.raw_costs.mean())


@dataclass(frozen=True)
class ChoiceSet:
    """Up to k candidates with pairwise-distinct first actions, in greedy
    insertion order; remembers the state they were generated from."""

    state: State
    items: tuple[CandidateIntervention, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("choice set cannot be empty")
        keys = [c.action.key() for c in self.items]
        if len(set(keys)) != len(keys):
            raise ValueError("first actions must be pairwise distinct")

    def __len__(self) -> int:
        return len(self.items)

    def interventions(self) -> tuple[Intervention, ...]:
        return tuple(c.intervention for c in self.items)


def expected_utility(candidate: CandidateIntervention) -> float:
    """Negated Monte Carlo expected cost (padded cache)."""
    if candidate.costs.size == 0:
        raise ValueError("candidate has no particle costs")
    return float(-candidate.costs.mean())


def build_candidates(state: State, particles: ParticleSet, problem: Problem,
                     generator: RecourseGenerator, w_hat: ScmWeights,
                     failure_penalty: float = DEFAULT_FAILURE_PENALTY,
                     ) -> list[CandidateIntervention]:
    """One candidate per feasible action, each starting with that action.

    Candidates that fail to achieve recourse stay in the pool but have
    their per-particle costs padded by `failure_penalty` times the largest
    successful candidate cost, so they never look artificially cheap.
    """
    pool = []
    for action in feasible_actions(state, problem.catalog):
        result = generator.generate(state, w_hat, forced_first=action)
        phi = intervention_cost_features(result.intervention, state, problem.graph)
        raw = costs_over_particles(phi, particles.particles)
        pool.append((action, result, raw))
    if not pool:
        return []
    successful_max = max((raw.max() for _, res, raw in pool if res.success), default=0.0)
    pad = failure_penalty * successful_max
    out = []
    for action, result, raw in pool:
        costs = raw if result.success else raw + pad
        out.append(CandidateIntervention(action=action, intervention=result.intervention,
                                         success=result.success, costs=costs,
                                         raw_costs=raw, rules=result.rules))
    return out


def _cost_matrix(choice_set: ChoiceSet) -> np.ndarray:
    return np.stack([c.costs for c in choice_set.items])


def _costs_under(choice_set: ChoiceSet, weights: ScmWeights, graph) -> np.ndarray:
    return np.array([intervention_cost(c.intervention, choice_set.state, weights, graph)
                     for c in choice_set.items])


def response_probabilities_logistic(choice_set: ChoiceSet, weights: ScmWeights,
                                    lam_temp: float, graph) -> np.ndarray:
    """Softmax of -lam * candidate cost over the set; sums to one."""
    if lam_temp < 0:
        raise ValueError("temperature must be nonnegative")
    utilities = -lam_temp * _costs_under(choice_set, weights, graph)
    utilities -= utilities.max()
    e = np.exp(utilities)
    return e / e.sum()


def response_probability_logistic(choice_set: ChoiceSet, index: int,
                                  weights: ScmWeights, lam_temp: float, graph) -> float:
    if not 0 <= index < len(choice_set):
        raise ValueError("action not in the choice set")
    return float(response_probabilities_logistic(choice_set, weights, lam_temp, graph)[index])


def response_probabilities_noiseless(choice_set: ChoiceSet, weights: ScmWeights,
                                     graph) -> np.ndarray:
    """Indicator of the strict cost minimizer; exact ties split uniformly."""
    costs = _costs_under(choice_set, weights, graph)
    minimum = costs.min()
    winners = costs == minimum
    return winners / winners.sum()


def response_probability_noiseless(choice_set: ChoiceSet, index: int,
                                   weights: ScmWeights, graph) -> float:
    if not 0 <= index < len(choice_set):
        raise ValueError("action not in the choice set")
    return float(response_probabilities_noiseless(choice_set, weights, graph)[index])


def eus_noiseless(choice_set: ChoiceSet) -> float:
    """Negated mean over particles of the within-set minimum cost."""
    return float(-_cost_matrix(choice_set).min(axis=0).mean())


def eus_logistic(choice_set: ChoiceSet, lam_temp: float) -> float:
    """Softmax-weighted negated mean cost; diagnostic only, the greedy
    builder optimizes the noiseless form."""
    costs = _cost_matrix(choice_set)  # (k, n)
    utilities = -lam_temp * costs
    utilities -= utilities.max(axis=0, keepdims=True)
    probs = np.exp(utilities)
    probs /= probs.sum(axis=0, keepdims=True)
    return float(-(probs * costs).sum(axis=0).mean())


def greedy_choice_set(state: State, candidates: Sequence[CandidateIntervention],
                      k: int) -> ChoiceSet:
    """Greedy EUS maximization: repeatedly add the candidate whose inclusion
    most increases the noiseless objective. Ties keep the earliest
    candidate, i.e. catalog order of the first action."""
    if k < 1:
        raise ValueError("choice sets need k >= 1")
    if not candidates:
        raise NoFeasibleActionError("no candidates to choose from")
    remaining = list(range(len(candidates)))
    chosen: list[int] = []
    running_min: np.ndarray | None = None
    while remaining and len(chosen) < k:
        # the incumbent objective is shared by all candidates this round, so
        # maximizing the new value maximizes the marginal gain
        best_i, best_val = None, -np.inf
        for i in remaining:
            mins = candidates[i].costs if running_min is None \
                else np.minimum(running_min, candidates[i].costs)
            val = float(-mins.mean())
            if val > best_val:
                best_i, best_val = i, val
        assert best_i is not None
        chosen.append(best_i)
        running_min = candidates[best_i].costs if running_min is None \
            else np.minimum(running_min, candidates[best_i].costs)
        remaining.remove(best_i)
    return ChoiceSet(state=state, items=tuple(candidates[i] for i in chosen))


def submod_choice(state: State, k: int, problem: Problem, dataset: ElicitationDataset,
                  w_hat: ScmWeights, generator: RecourseGenerator,
                  particles: ParticleSet,
                  failure_penalty: float = DEFAULT_FAILURE_PENALTY) -> ChoiceSet:
    """Feasible actions -> forced-first candidates -> greedy EUS set."""
    candidates = build_candidates(state, particles, problem, generator, w_hat,
                                  failure_penalty)
    if not candidates:
        raise NoFeasibleActionError("no feasible action for choice-set construction")
    return greedy_choice_set(state, candidates, k)


@dataclass(frozen=True)
class SessionConfig:
    q: int
    k: int
    seed: int = 0
    failure_penalty: float = DEFAULT_FAILURE_PENALTY
    top_fraction: float = 0.1
    prior_particles: int = 1000

    def __post_init__(self) -> None:
        if self.q < 0 or self.k < 1:
            raise ValueError("need q >= 0 and k >= 1")


@dataclass
class Session:
    """Resumable elicitation session.

    Phases: querying (transient, building the next choice set),
    awaiting_choice (a set is pending), finalized (final intervention
    computed from the initial state under the final weight estimate).
    """

    problem: Problem
    generator: RecourseGenerator
    config: SessionConfig
    initial_state: State
    current_state: State
    accumulated: Intervention
    dataset: ElicitationDataset
    particles: ParticleSet
    w_hat: ScmWeights
    t: int = 0
    phase: str = PHASE_QUERYING
    pending: ChoiceSet | None = None
    final: GenerationResult | None = None
    transcript: list = field(default_factory=list)

    @property
    def round(self) -> int:
        return self.t


def _round_seed(config: SessionConfig, purpose: str, round_index: int) -> int:
    return stable_seed("session", config.seed, purpose, round_index)


def start_session(problem: Problem, generator: RecourseGenerator, initial_state: State,
                  config: SessionConfig) -> Session:
    """Initialize with the prior expectation and run to the first query (or
    straight to finalization when the budget is zero)."""
    particles = prior_sample(problem.prior, config.prior_particles,
                             seed=_round_seed(config, "prior", 0))
    session = Session(problem=problem, generator=generator, config=config,
                      initial_state=initial_state, current_state=initial_state,
                      accumulated=Intervention(), dataset=ElicitationDataset(),
                      particles=particles,
                      w_hat=ScmWeights.from_array(problem.prior.mean()))
    _advance(session)
    return session


def _advance(session: Session) -> None:
    if session.phase != PHASE_QUERYING:
        raise SessionPhaseError(f"cannot advance from phase {session.phase!r}")
    if session.t >= session.config.q:
        _finalize(session)
        return
    try:
        session.pending = submod_choice(
            session.current_state, session.config.k, session.problem,
            session.dataset, session.w_hat, session.generator, session.particles,
            session.config.failure_penalty)
    except NoFeasibleActionError:
        if session.t == 0:
            raise  # dead on arrival: the caller should reject the session
        # dead-ended mid-session: fall back to finalizing with what we know
        _finalize(session)
        return
    session.phase = PHASE_AWAITING


def _finalize(session: Session) -> None:
    session.final = session.generator.generate(session.initial_state, session.w_hat)
    session.pending = None
    session.phase = PHASE_FINALIZED


def session_step(session: Session, choice_index: int) -> Session:
    """Record the user's pick, extend the accumulated intervention, update
    the posterior, and move to the next query or finalization."""
    if session.phase != PHASE_AWAITING or session.pending is None:
        raise SessionPhaseError(f"no pending choice in phase {session.phase!r}")
    pending = session.pending
    if not 0 <= choice_index < len(pending):
        raise ValueError(f"choice index {choice_index} outside the set of {len(pending)}")

    problem = session.problem
    record = ChoiceRecord.build(pending.state, list(pending.interventions()),
                                choice_index, problem.graph)
    session.dataset = session.dataset.append(record)

    chosen = pending.items[choice_index]
    session.accumulated = session.accumulated.append(chosen.action)
    session.current_state = apply_intervention(session.accumulated, session.initial_state)
    # once the accumulated actions already achieve recourse, restart from the
    # initial state so later questions keep probing fresh preference ground
    h = problem.classifier
    if h.predict(session.current_state) != h.predict(session.initial_state):
        session.current_state = session.initial_state
        session.accumulated = Intervention()

    session.particles = posterior_sample(
        problem.prior, session.dataset, problem.lam_temp,
        n_walkers=problem.sampler.n_walkers, n_steps=problem.sampler.n_steps,
        seed=_round_seed(session.config, "posterior", session.t),
        burn_in=problem.sampler.burn_in, stretch=problem.sampler.stretch,
        n_keep=problem.sampler.n_keep)
    session.w_hat = point_estimate(session.particles, session.config.top_fraction)

    session.transcript.append(_transcript_entry(session.t, pending, choice_index,
                                                session.w_hat))
    session.t += 1
    session.phase = PHASE_QUERYING
    session.pending = None
    _advance(session)
    return session


def final_intervention(session: Session) -> GenerationResult:
    """The recommendation computed from the initial state under the final
    weight estimate; only available once the budget is exhausted."""
    if session.phase != PHASE_FINALIZED or session.final is None:
        raise SessionPhaseError("session is not finalized yet")
    return session.final


def run_scripted_session(problem: Problem, generator: RecourseGenerator,
                         initial_state: State, config: SessionConfig,
                         respond) -> Session:
    """Drives a full session with `respond(choice_set) -> index`."""
    session = start_session(problem, generator, initial_state, config)
    while session.phase == PHASE_AWAITING:
        session = session_step(session, respond(session.pending))
    return session


def _transcript_entry(round_index: int, choice_set: ChoiceSet, chosen: int,
                      w_hat: ScmWeights) -> dict:
    return {
        "round": round_index,
        "state": list(choice_set.state.values),
        "items": [{
            "action": list(c.action.key()),
            "intervention": [list(k) for k in c.intervention.keys()],
            "success": c.success,
            "expected_cost": c.expected_cost,
        } for c in choice_set.items],
        "chosen": chosen,
        "w_hat": list(w_hat.values),
    }
