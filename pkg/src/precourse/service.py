"""HTTP session service around the elicitation loop.

Sessions are created against a named dataset, advance one choice at a
time, and persist after every mutation in a single-file sqlite store, so
a restarted service resumes where it left off. Responses never carry
posterior particles or weight estimates; per-session randomness is fixed
at creation so any session can be replayed from its transcript.
"""

from __future__ import annotations

import json
import secrets
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .belief import ChoiceRecord, ElicitationDataset, ParticleSet
from .core.actions import Intervention
from .core.classifier import StateEncoder
from .core.schema import CategoricalFeature, DomainError, State
from .core.scm import ScmWeights, costs_over_particles, intervention_cost_features
from .dataset import Problem, load_builtin_problem, load_problem
from .efare.automaton import Automaton, AutomatonGenerator, BooleanRule
from .elicit import (
    PHASE_AWAITING,
    PHASE_FINALIZED,
    CandidateIntervention,
    ChoiceSet,
    Session,
    SessionConfig,
    SessionPhaseError,
    start_session,
    session_step,
)
from .generator.base import GenerationResult, RecourseGenerator
from .generator.mcts import MctsGenerator, NoFeasibleActionError
from .generator.exhaustive import ExhaustiveGenerator
from .generator.policy import PolicyModel, UniformPolicy

SCHEMA_VERSION = 1
GENERATOR_NAMES = ("wfare", "wefare", "exhaustive")


@dataclass
class DatasetBundle:
    problem: Problem
    policy: PolicyModel | None = None
    automaton: Automaton | None = None

    def generator(self, name: str) -> RecourseGenerator:
        problem = self.problem
        if name == "exhaustive":
            return ExhaustiveGenerator(problem.catalog, problem.graph,
                                       problem.classifier,
                                       t_max=problem.generator_config.t_max)
        if name == "wfare":
            policy = self.policy or UniformPolicy(problem.catalog.function_ids(),
                                                  problem.catalog.max_grid_size())
            return MctsGenerator(problem.catalog, problem.graph, problem.classifier,
                                 policy, problem.generator_config)
        if name == "wefare":
            if self.automaton is None:
                raise KeyError("no automaton artifact for this dataset")
            return AutomatonGenerator(self.automaton, problem.catalog, problem.graph,
                                      problem.classifier,
                                      t_max=problem.generator_config.t_max)
        raise KeyError(f"unknown generator {name!r}")


class DatasetRegistry:
    """Datasets available to the service: built-ins plus an artifact
    directory laid out as <dir>/<dataset>/{config.yaml,policy.json,automaton.json}."""

    def __init__(self, artifact_dir: str | Path | None = None,
                 include_builtin: bool = True):
        self._bundles: dict[str, DatasetBundle] = {}
        if include_builtin:
            for name in ("tiny", "synthetic"):
                self._bundles[name] = DatasetBundle(problem=load_builtin_problem(name))
        if artifact_dir is not None:
            self._load_artifacts(Path(artifact_dir))

    def _load_artifacts(self, root: Path) -> None:
        if not root.exists():
            return
        for config_path in sorted(root.glob("*/config.yaml")):
            problem = load_problem(config_path)
            bundle = DatasetBundle(problem=problem)
            policy_path = config_path.parent / "policy.json"
            if policy_path.exists():
                blob = json.loads(policy_path.read_text())
                encoder = StateEncoder.from_domain(problem.schema)
                bundle.policy = PolicyModel.from_dict(blob, encoder)
            automaton_path = config_path.parent / "automaton.json"
            if automaton_path.exists():
                bundle.automaton = Automaton.from_text(automaton_path.read_text())
            self._bundles[problem.name] = bundle

    def ids(self) -> list[str]:
        return sorted(self._bundles)

    def bundle(self, dataset: str) -> DatasetBundle:
        if dataset not in self._bundles:
            raise KeyError(f"unknown dataset {dataset!r}")
        return self._bundles[dataset]


class SessionStore:
    """Single-file keyed store for serialized session records."""

    def __init__(self, path: str | Path):
        self._path = str(path)
        self._lock = threading.Lock()
        with self._connect() as conn:
            conn.execute(
                "CREATE TABLE IF NOT EXISTS sessions ("
                "id TEXT PRIMARY KEY, record TEXT NOT NULL, "
                "created REAL NOT NULL, updated REAL NOT NULL, "
                "dataset TEXT NOT NULL, status TEXT NOT NULL)")

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self._path)

    def put(self, session_id: str, record: Mapping, dataset: str, status: str) -> None:
        blob = json.dumps(record, sort_keys=True)
        now = time.time()
        with self._lock, self._connect() as conn:
            conn.execute(
                "INSERT INTO sessions (id, record, created, updated, dataset, status) "
                "VALUES (?, ?, ?, ?, ?, ?) "
                "ON CONFLICT(id) DO UPDATE SET record = excluded.record, "
                "updated = excluded.updated, status = excluded.status",
                (session_id, blob, now, now, dataset, status))

    def get(self, session_id: str) -> dict | None:
        with self._lock, self._connect() as conn:
            row = conn.execute("SELECT record FROM sessions WHERE id = ?",
                               (session_id,)).fetchone()
        return json.loads(row[0]) if row else None


# --- session (de)serialization -------------------------------------------

def _candidate_to_dict(candidate: CandidateIntervention) -> dict:
    return {
        "action": list(candidate.action.key()),
        "intervention": [list(k) for k in candidate.intervention.keys()],
        "success": candidate.success,
        "rules": [[list(lit) for lit in rule.literals] for rule in candidate.rules],
    }


def _candidate_from_dict(data: Mapping, problem: Problem) -> CandidateIntervention:
    action = problem.catalog.action(data["action"][0], float(data["action"][1]))
    actions = tuple(problem.catalog.action(k[0], float(k[1]))
                    for k in data["intervention"])
    intervention = Intervention(actions)
    rules = tuple(BooleanRule(literals=tuple((str(n), str(op), float(t))
                                             for n, op, t in rule))
                  for rule in data["rules"])
    return CandidateIntervention(
        action=action, intervention=intervention, success=bool(data["success"]),
        costs=np.zeros(1), raw_costs=np.zeros(1), rules=rules)


def serialize_session(session: Session, generator_name: str) -> dict:
    data = {
        "schema_version": SCHEMA_VERSION,
        "generator": generator_name,
        "config": {"q": session.config.q, "k": session.config.k,
                   "seed": session.config.seed,
                   "failure_penalty": session.config.failure_penalty,
                   "top_fraction": session.config.top_fraction,
                   "prior_particles": session.config.prior_particles},
        "initial_state": list(session.initial_state.values),
        "current_state": list(session.current_state.values),
        "accumulated": [list(k) for k in session.accumulated.keys()],
        "records": [{
            "state": list(r.state.values),
            "interventions": [[list(k) for k in iv.keys()] for iv in r.interventions],
            "chosen": r.chosen,
        } for r in session.dataset.records],
        "particles": session.particles.particles.tolist(),
        "log_likelihoods": session.particles.log_likelihoods.tolist(),
        "w_hat": list(session.w_hat.values),
        "t": session.t,
        "phase": session.phase,
        "pending": [
            _candidate_to_dict(c) for c in session.pending.items
        ] if session.pending is not None else None,
        "pending_state": list(session.pending.state.values)
        if session.pending is not None else None,
        "final": {
            "intervention": [list(k) for k in session.final.intervention.keys()],
            "success": session.final.success,
            "rules": [[list(lit) for lit in rule.literals]
                      for rule in session.final.rules],
        } if session.final is not None else None,
        "transcript": session.transcript,
    }
    return data


def deserialize_session(data: Mapping, problem: Problem,
                        generator: RecourseGenerator) -> Session:
    cfg = SessionConfig(**data["config"])
    schema = problem.schema
    initial = schema.state(data["initial_state"])
    current = schema.state(data["current_state"])
    accumulated = Intervention(tuple(problem.catalog.action(k[0], float(k[1]))
                                     for k in data["accumulated"]))
    records = []
    for rd in data["records"]:
        state = schema.state(rd["state"])
        interventions = [Intervention(tuple(problem.catalog.action(k[0], float(k[1]))
                                            for k in iv))
                         for iv in rd["interventions"]]
        records.append(ChoiceRecord.build(state, interventions, rd["chosen"],
                                          problem.graph))
    particles = ParticleSet(particles=np.asarray(data["particles"], dtype=float),
                            log_likelihoods=np.asarray(data["log_likelihoods"],
                                                       dtype=float),
                            diagnostics={"source": "restored"})
    session = Session(
        problem=problem, generator=generator, config=cfg,
        initial_state=initial, current_state=current, accumulated=accumulated,
        dataset=ElicitationDataset(tuple(records)), particles=particles,
        w_hat=ScmWeights(tuple(float(x) for x in data["w_hat"])),
        t=int(data["t"]), phase=data["phase"])
    session.transcript = list(data["transcript"])
    if data["pending"] is not None:
        pending_state = schema.state(data["pending_state"])
        raw_candidates = [_candidate_from_dict(c, problem) for c in data["pending"]]
        # rebuild the per-particle cost caches exactly as at creation time
        rebuilt = []
        raws = []
        for cand in raw_candidates:
            phi = intervention_cost_features(cand.intervention, pending_state,
                                             problem.graph)
            raws.append(costs_over_particles(phi, particles.particles))
        successful_max = max((raws[i].max() for i, c in enumerate(raw_candidates)
                              if c.success), default=0.0)
        pad = cfg.failure_penalty * successful_max
        for cand, raw in zip(raw_candidates, raws):
            costs = raw if cand.success else raw + pad
            rebuilt.append(CandidateIntervention(
                action=cand.action, intervention=cand.intervention,
                success=cand.success, costs=costs, raw_costs=raw, rules=cand.rules))
        session.pending = ChoiceSet(state=pending_state, items=tuple(rebuilt))
    if data["final"] is not None:
        fd = data["final"]
        intervention = Intervention(tuple(problem.catalog.action(k[0], float(k[1]))
                                          for k in fd["intervention"]))
        rules = tuple(BooleanRule(literals=tuple((str(n), str(op), float(t))
                                                 for n, op, t in rule))
                      for rule in fd["rules"])
        session.final = GenerationResult(intervention, bool(fd["success"]), rules)
    return session


# --- API payload rendering -------------------------------------------------

def _action_payload(action, state: State, rule: BooleanRule | None) -> dict:
    feature = state.schema.features[action.target_index]
    new_value = action.new_value(state)
    old_value = state.values[action.target_index]
    if isinstance(feature, CategoricalFeature):
        from_v, to_v = feature.levels[int(old_value)], feature.levels[int(new_value)]
    else:
        from_v, to_v = old_value, new_value
    payload = {
        "function": action.function_id,
        "argument": action.argument,
        "feature": action.target,
        "from": from_v,
        "to": to_v,
        "label": action.describe(state),
    }
    if rule is not None:
        payload["rule"] = rule.render()
    return payload


def _choice_set_payload(session: Session) -> dict:
    assert session.pending is not None
    items = []
    for index, candidate in enumerate(session.pending.items):
        state = session.pending.state
        actions = []
        for pos, action in enumerate(candidate.intervention.actions):
            rule = candidate.rules[pos] if pos < len(candidate.rules) else None
            actions.append(_action_payload(action, state, rule))
            state = action.apply(state)
        items.append({
            "index": index,
            "first_action": actions[0]["label"] if actions else "",
            "actions": actions,
            "expected_cost": candidate.expected_cost,
            "achieves_recourse": candidate.success,
        })
    return {"round": session.t, "items": items}


def _final_payload(session: Session) -> dict:
    assert session.final is not None
    state = session.initial_state
    actions = []
    for pos, action in enumerate(session.final.intervention.actions):
        rule = session.final.rules[pos] if pos < len(session.final.rules) else None
        actions.append(_action_payload(action, state, rule))
        state = action.apply(state)
    return {"actions": actions, "success": session.final.success}


def _session_view(session_id: str, dataset: str, session: Session) -> dict:
    view = {
        "schema_version": SCHEMA_VERSION,
        "session_id": session_id,
        "dataset": dataset,
        "phase": session.phase,
        "round": session.t,
        "budget": session.config.q,
        "set_size": session.config.k,
    }
    if session.phase == PHASE_AWAITING:
        view["choice_set"] = _choice_set_payload(session)
    if session.phase == PHASE_FINALIZED:
        view["final"] = _final_payload(session)
    return view


# --- request models ---------------------------------------------------------

class CreateSessionRequest(BaseModel):
    dataset: str
    features: dict
    q: int = Field(ge=0, le=50)
    k: int = Field(ge=1, le=10)
    generator: str = "wfare"
    seed: int | None = None


class ChoiceRequest(BaseModel):
    round: int = Field(ge=0)
    index: int


def create_app(registry: DatasetRegistry, store: SessionStore,
               static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="precourse session service")
    locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def session_lock(session_id: str) -> threading.Lock:
        with locks_guard:
            return locks.setdefault(session_id, threading.Lock())

    def load_session(session_id: str) -> tuple[Session, dict]:
        record = store.get(session_id)
        if record is None:
            raise HTTPException(status_code=404, detail="unknown session")
        bundle = registry.bundle(record["dataset"])
        generator = bundle.generator(record["session"]["generator"])
        session = deserialize_session(record["session"], bundle.problem, generator)
        return session, record

    def persist(session_id: str, dataset: str, generator_name: str,
                session: Session, responses: dict) -> None:
        record = {
            "dataset": dataset,
            "session": serialize_session(session, generator_name),
            "responses": responses,
        }
        store.put(session_id, record, dataset, session.phase)

    @app.get("/datasets")
    def list_datasets() -> dict:
        out = []
        for dataset_id in registry.ids():
            bundle = registry.bundle(dataset_id)
            problem = bundle.problem
            generators = [name for name in GENERATOR_NAMES
                          if name != "wefare" or bundle.automaton is not None]
            out.append({
                "id": dataset_id,
                "features": problem.schema.to_dict()["features"],
                "generators": generators,
                "default_q": 3,
                "default_k": 2,
            })
        return {"schema_version": SCHEMA_VERSION, "datasets": out}

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest) -> JSONResponse:
        try:
            bundle = registry.bundle(request.dataset)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown dataset")
        problem = bundle.problem
        try:
            state = problem.schema.state_from_mapping(request.features)
        except DomainError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        try:
            generator = bundle.generator(request.generator)
        except KeyError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        seed = request.seed if request.seed is not None else secrets.randbits(48)
        config = SessionConfig(q=request.q, k=request.k, seed=seed)
        try:
            session = start_session(problem, generator, state, config)
        except NoFeasibleActionError:
            raise HTTPException(status_code=409, detail="no feasible actions")
        session_id = uuid.uuid4().hex
        persist(session_id, request.dataset, request.generator, session, {})
        return JSONResponse(status_code=201,
                            content=_session_view(session_id, request.dataset, session))

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        session, record = load_session(session_id)
        return _session_view(session_id, record["dataset"], session)

    @app.post("/sessions/{session_id}/choice")
    def submit_choice(session_id: str, request: ChoiceRequest) -> dict:
        with session_lock(session_id):
            session, record = load_session(session_id)
            responses = record.get("responses", {})
            replay_key = f"{request.round}:{request.index}"
            if replay_key in responses:
                return responses[replay_key]
            if session.phase != PHASE_AWAITING:
                raise HTTPException(status_code=409,
                                    detail=f"session is {session.phase}")
            if request.round != session.t:
                raise HTTPException(status_code=409,
                                    detail=f"round {request.round} is not current")
            if not 0 <= request.index < len(session.pending.items):
                raise HTTPException(status_code=400, detail="invalid choice index")
            try:
                session = session_step(session, request.index)
            except SessionPhaseError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            view = _session_view(session_id, record["dataset"], session)
            responses[replay_key] = view
            persist(session_id, record["dataset"], record["session"]["generator"],
                    session, responses)
            return view

    if static_dir is not None and Path(static_dir).exists():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True),
                  name="frontend")

    return app
