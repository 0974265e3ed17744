"""Command-line entry points: train, extract-efare, simulate, evaluate, serve.

Every verb takes --config (a dataset document path or a built-in name),
--seed, and --out. Output files are written atomically (write to a
temporary file, then rename); failures exit nonzero with a diagnostic.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from pathlib import Path

from .core.classifier import StateEncoder
from .core.actions import Intervention
from .core.scm import ScmWeights
from .dataset import (
    Problem,
    builtin_config_path,
    load_builtin_problem,
    load_problem,
    sample_population,
)
from .efare.automaton import Automaton, AutomatonGenerator, build_automaton, extract_traces
from .evaluation import (
    ExperimentConfig,
    ExperimentResult,
    UserRun,
    metrics_rows,
    oracle_cost_range,
    run_experiment,
    write_reports,
)
from .generator.base import stable_seed
from .generator.exhaustive import ExhaustiveGenerator
from .generator.mcts import MctsGenerator, train_wfare
from .generator.policy import PolicyModel, UniformPolicy


def _resolve_problem(config: str) -> tuple[Problem, Path]:
    path = Path(config)
    if path.exists():
        return load_problem(path), path
    return load_builtin_problem(config), builtin_config_path(config)


def _write_text_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _load_policy(problem: Problem, artifact_dir: Path) -> PolicyModel:
    policy_path = artifact_dir / "policy.json"
    if not policy_path.exists():
        raise FileNotFoundError(f"model artifact not found: {policy_path}")
    blob = json.loads(policy_path.read_text())
    if blob.get("schema_hash") not in (None, problem.schema.content_hash()):
        raise ValueError("policy artifact was trained against a different schema")
    return PolicyModel.from_dict(blob, StateEncoder.from_domain(problem.schema))


def _build_generator(name: str, problem: Problem, artifact_dir: Path | None):
    if name == "exhaustive":
        return ExhaustiveGenerator(problem.catalog, problem.graph, problem.classifier,
                                   t_max=problem.generator_config.t_max)
    if name == "wfare":
        if artifact_dir is not None and (artifact_dir / "policy.json").exists():
            policy = _load_policy(problem, artifact_dir)
        else:
            policy = UniformPolicy(problem.catalog.function_ids(),
                                   problem.catalog.max_grid_size())
        return MctsGenerator(problem.catalog, problem.graph, problem.classifier,
                             policy, problem.generator_config)
    if name == "wefare":
        if artifact_dir is None:
            raise FileNotFoundError("wefare needs --artifacts with automaton.json")
        automaton_path = artifact_dir / "automaton.json"
        if not automaton_path.exists():
            raise FileNotFoundError(f"automaton artifact not found: {automaton_path}")
        automaton = Automaton.from_text(automaton_path.read_text())
        return AutomatonGenerator(automaton, problem.catalog, problem.graph,
                                  problem.classifier,
                                  t_max=problem.generator_config.t_max)
    raise ValueError(f"unknown generator {name!r}")


def cmd_train(args: argparse.Namespace) -> int:
    problem, config_path = _resolve_problem(args.config)
    out = Path(args.out)
    states = sample_population(problem, args.train_states,
                               stable_seed("train-states", args.seed))
    cfg = problem.generator_config
    if args.epochs is not None:
        from dataclasses import replace

        cfg = replace(cfg, epochs=args.epochs)
    policy, log = train_wfare(states, problem.prior, problem.classifier, cfg,
                              problem.catalog, problem.graph, seed=args.seed)
    blob = policy.to_dict()
    blob["schema_hash"] = problem.schema.content_hash()
    _write_text_atomic(out / "policy.json", json.dumps(blob, sort_keys=True))
    log_lines = ["epoch,loss,validity"]
    log_lines += [f"{row['epoch']},{row['loss']!r},{row['validity']!r}" for row in log]
    _write_text_atomic(out / "training_log.csv", "\n".join(log_lines) + "\n")
    shutil.copyfile(config_path, out / "config.yaml")
    final_validity = log[-1]["validity"] if log else float("nan")
    print(f"trained policy on {len(states)} states, "
          f"{cfg.epochs} epochs, final validity {final_validity}")
    print(f"artifacts: {out / 'policy.json'}, {out / 'training_log.csv'}")
    return 0


def cmd_extract_efare(args: argparse.Namespace) -> int:
    problem, _ = _resolve_problem(args.config)
    out = Path(args.out)
    policy = _load_policy(problem, out)
    generator = MctsGenerator(problem.catalog, problem.graph, problem.classifier,
                              policy, problem.generator_config)
    states = sample_population(problem, args.trace_states,
                               stable_seed("trace-states", args.seed))
    result = extract_traces(generator, states, problem.prior, problem.classifier,
                            n=args.traces, catalog=problem.catalog,
                            graph=problem.graph, seed=args.seed,
                            max_attempts=4 * args.traces)
    if not result.traces:
        raise RuntimeError("no successful traces extracted; cannot build automaton")
    automaton = build_automaton(result.traces, result.missing_cost, problem.catalog,
                                max_depth=args.tree_depth)
    _write_text_atomic(out / "automaton.json", automaton.to_text())
    print(f"extracted {len(result.traces)} traces "
          f"({result.failures}/{result.attempts} attempts failed)")
    print(f"artifact: {out / 'automaton.json'}")
    return 0


def _experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    return ExperimentConfig(
        dataset=args.config,
        q_grid=tuple(int(x) for x in args.q_grid.split(",")),
        k_grid=tuple(int(x) for x in args.k_grid.split(",")),
        response_models=tuple(args.models.split(",")),
        n_users=args.users,
        seed=args.seed,
        generator_name=args.generator,
        oracle_t_max=args.oracle_t_max,
    )


def _transcripts_payload(result: ExperimentResult) -> dict:
    cfg = result.config
    return {
        "schema_version": 1,
        "dataset": result.problem.name,
        "config": {
            "q_grid": list(cfg.q_grid), "k_grid": list(cfg.k_grid),
            "response_models": list(cfg.response_models), "n_users": cfg.n_users,
            "seed": cfg.seed, "generator_name": cfg.generator_name,
            "oracle_t_max": cfg.oracle_t_max,
        },
        "states": [list(s.values) for s in result.states],
        "true_weights": [list(w.values) for w in result.true_weights],
        "runs": [run.to_dict() for run in result.runs],
    }


def _result_from_transcripts(problem: Problem, blob: dict) -> ExperimentResult:
    cfg_blob = blob["config"]
    config = ExperimentConfig(
        dataset=blob["dataset"], q_grid=tuple(cfg_blob["q_grid"]),
        k_grid=tuple(cfg_blob["k_grid"]),
        response_models=tuple(cfg_blob["response_models"]),
        n_users=int(cfg_blob["n_users"]), seed=int(cfg_blob["seed"]),
        generator_name=cfg_blob["generator_name"],
        oracle_t_max=int(cfg_blob["oracle_t_max"]))
    states = [problem.schema.state(v) for v in blob["states"]]
    weights = [ScmWeights(tuple(float(x) for x in w)) for w in blob["true_weights"]]
    oracle_ranges = [oracle_cost_range(s, problem.catalog, problem.classifier, w,
                                       problem.graph, config.oracle_t_max)
                     for s, w in zip(states, weights)]
    runs = []
    for rd in blob["runs"]:
        intervention = Intervention(tuple(problem.catalog.action(k[0], float(k[1]))
                                          for k in rd["intervention"]))
        runs.append(UserRun(user=int(rd["user"]), q=int(rd["q"]), k=int(rd["k"]),
                            model=rd["model"], intervention=intervention,
                            success=bool(rd["success"]),
                            transcript=rd["transcript"]))
    return ExperimentResult(config=config, problem=problem, states=states,
                            true_weights=weights, oracle_ranges=oracle_ranges,
                            runs=runs)


def cmd_simulate(args: argparse.Namespace) -> int:
    problem, _ = _resolve_problem(args.config)
    artifact_dir = Path(args.artifacts) if args.artifacts else None
    generator = _build_generator(args.generator, problem, artifact_dir)
    config = _experiment_config(args)
    result = run_experiment(problem, generator, config)
    out = Path(args.out)
    _write_text_atomic(out / "transcripts.json",
                       json.dumps(_transcripts_payload(result), sort_keys=True))
    print(f"simulated {len(result.runs)} sessions "
          f"({config.n_users} users x {len(config.q_grid)} budgets x "
          f"{len(config.k_grid)} set sizes x {len(config.response_models)} models)")
    print(f"transcripts: {out / 'transcripts.json'}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    problem, _ = _resolve_problem(args.config)
    if args.transcripts:
        blob = json.loads(Path(args.transcripts).read_text())
        result = _result_from_transcripts(problem, blob)
    else:
        artifact_dir = Path(args.artifacts) if args.artifacts else None
        generator = _build_generator(args.generator, problem, artifact_dir)
        result = run_experiment(problem, generator, _experiment_config(args))
    paths = write_reports(result, args.out)
    for row in metrics_rows(result):
        print(f"q={row['q']} k={row['k']} noise={row['noise']}: "
              f"validity={row['validity']:.3f} "
              f"norm_regret={row['mean_norm_regret']:.3f}")
    print("reports: " + ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import DatasetRegistry, SessionStore, create_app

    artifacts = args.artifacts or os.environ.get("PRECOURSE_ARTIFACTS")
    registry = DatasetRegistry(artifact_dir=artifacts)
    store = SessionStore(args.db)
    static = args.static or os.environ.get("PRECOURSE_STATIC")
    app = create_app(registry, store, static_dir=static)
    bind = args.bind or os.environ.get("PRECOURSE_BIND", "127.0.0.1:8000")
    host, _, port = bind.partition(":")
    uvicorn.run(app, host=host, port=int(port or 8000))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="precourse",
        description="interactive algorithmic recourse with preference elicitation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out_default: str | None = None) -> None:
        p.add_argument("--config", required=True,
                       help="dataset config path or built-in name")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=out_default, required=out_default is None)

    p_train = sub.add_parser("train", help="train the search policy")
    common(p_train)
    p_train.add_argument("--train-states", type=int, default=60)
    p_train.add_argument("--epochs", type=int, default=None)
    p_train.set_defaults(func=cmd_train)

    p_extract = sub.add_parser("extract-efare",
                               help="distill an explainable automaton from a "
                                    "trained policy")
    common(p_extract)
    p_extract.add_argument("--traces", type=int, default=200)
    p_extract.add_argument("--trace-states", type=int, default=60)
    p_extract.add_argument("--tree-depth", type=int, default=4)
    p_extract.set_defaults(func=cmd_extract_efare)

    def experiment_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--users", type=int, default=20)
        p.add_argument("--q-grid", default="1,10")
        p.add_argument("--k-grid", default="2")
        p.add_argument("--models", default="logistic")
        p.add_argument("--generator", default="exhaustive",
                       choices=("wfare", "wefare", "exhaustive"))
        p.add_argument("--artifacts", default=None)
        p.add_argument("--oracle-t-max", type=int, default=4)

    p_sim = sub.add_parser("simulate", help="run seeded simulated-user sessions")
    common(p_sim)
    experiment_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_eval = sub.add_parser("evaluate", help="compute metric reports")
    common(p_eval)
    experiment_flags(p_eval)
    p_eval.add_argument("--transcripts", default=None,
                        help="reuse transcripts from a previous simulate run")
    p_eval.set_defaults(func=cmd_evaluate)

    p_serve = sub.add_parser("serve", help="start the HTTP session service")
    p_serve.add_argument("--config", default=None, help="unused; datasets come "
                                                        "from built-ins and --artifacts")
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--out", default=None)
    p_serve.add_argument("--artifacts", default=None)
    p_serve.add_argument("--db", default="sessions.sqlite")
    p_serve.add_argument("--static", default=None)
    p_serve.add_argument("--bind", default=None, help="host:port")
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
