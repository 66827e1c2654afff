"""Command-line entry points: simulate, train, evaluate, report."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import harness, marl
from .env import load_scenario
from .harness import (
    ExperimentConfig,
    experiment_cells,
    export_results,
    import_results,
    run_experiment,
    simulate_trials,
    summarize,
    write_trial_metrics,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario config file")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--trials", type=int, default=None, help="trials to run")
    p.add_argument("--out", type=Path, default=None, help="output path")
    p.add_argument(
        "--deterministic",
        action="store_true",
        help="single-threaded execution (results are seed-deterministic either way)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdw-arena",
        description="Multi-user redirected-walking simulation and reset-controller benchmark",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one scenario and dump per-trial metrics")
    _add_common(p_sim)
    p_sim.add_argument("--trajectory", type=Path, help="per-frame pose dump (first trial)")
    p_sim.add_argument("--events", type=Path, help="reset-event log (first trial)")
    p_sim.add_argument("--checkpoint", type=Path, help="policy checkpoint for MRC_POLICY")

    p_train = sub.add_parser("train", help="train the learned reset policy")
    _add_common(p_train)
    p_train.add_argument("--max-steps", type=int, default=100_000,
                         help="reset decisions to train on (desk-scale default)")
    p_train.add_argument("--batch-size", type=int, default=512)
    p_train.add_argument("--layers", type=int, default=2)
    p_train.add_argument("--hidden-units", type=int, default=64)
    p_train.add_argument("--learning-rate", type=float, default=0.001)
    p_train.add_argument("--episode-waypoints", type=int, default=20)
    p_train.add_argument("--single-agent", action="store_true",
                         help="train the joint-action variant instead")

    p_eval = sub.add_parser("evaluate", help="run an experiment grid")
    _add_common(p_eval)
    p_eval.add_argument("--experiment", choices=sorted(harness._EXPERIMENTS),
                        help="one of the paper-style grids")
    p_eval.add_argument("--mrc", choices=("greedy", "policy"), default="greedy")
    p_eval.add_argument("--checkpoint", type=Path, help="policy checkpoint (mrc=policy)")
    p_eval.add_argument("--waypoints", type=int, default=200,
                        help="virtual path length per trial")

    p_rep = sub.add_parser("report", help="summarize an exported result table")
    p_rep.add_argument("results", type=Path, help="JSON results file")
    p_rep.add_argument("--out", type=Path, help="also write the CSV table here")
    return parser


def _apply_determinism(args) -> None:
    if getattr(args, "deterministic", False):
        os.environ[harness.THREADS_ENV_VAR] = "1"


def cmd_simulate(args) -> int:
    if args.config is None:
        print("simulate requires --config", file=sys.stderr)
        return 2
    scenario = load_scenario(args.config)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    policy = marl.load_policy(args.checkpoint) if args.checkpoint else None
    if (scenario.reset == "MRC_POLICY") and policy is None:
        print("scenario uses MRC_POLICY: pass --checkpoint", file=sys.stderr)
        return 2
    trials = args.trials or 1
    metrics = simulate_trials(
        scenario, trials, policy=policy, trajectory_path=args.trajectory
    )
    out = args.out or Path("simulate_metrics.csv")
    write_trial_metrics(metrics, out)
    if args.events:
        harness.write_reset_events(metrics[0].events, args.events)
    total = sum(m.total_resets for m in metrics)
    print(f"{trials} trial(s): {total} resets total, metrics -> {out}")
    return 0


def cmd_train(args) -> int:
    if args.config is None:
        print("train requires --config", file=sys.stderr)
        return 2
    scenario = load_scenario(args.config)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    if scenario.reset != "MRC_POLICY":
        print("training scenario must set reset = MRC_POLICY", file=sys.stderr)
        return 2
    config = marl.TrainerConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        layers=args.layers,
        hidden_units=args.hidden_units,
        max_steps=args.max_steps,
        seed=args.seed if args.seed is not None else scenario.seed,
        episode_waypoints=args.episode_waypoints,
    )
    trainer = marl.train_single_agent if args.single_agent else marl.train
    params = trainer(config, scenario)
    out = args.out or Path("policy.npz")
    marl.save_policy(params, out)
    curve_path = Path(str(out) + ".curve.csv")
    marl.write_learning_curve(params, curve_path)
    rows = params.metadata.get("learning_curve", [])
    last = rows[-1] if rows else {}
    print(
        f"trained {params.kind} policy: {params.metadata.get('decisions', 0)} decisions, "
        f"{len(rows)} updates, final mean return {last.get('mean_return', float('nan')):.3f}; "
        f"checkpoint -> {out}, curve -> {curve_path}"
    )
    return 0


def cmd_evaluate(args) -> int:
    _apply_determinism(args)
    policy = None
    mrc_reset = "MRC_GREEDY"
    if args.mrc == "policy":
        if args.checkpoint is None:
            print("evaluate --mrc policy requires --checkpoint", file=sys.stderr)
            return 2
        policy = marl.load_policy(args.checkpoint)
        mrc_reset = "MRC_POLICY"
    if args.experiment:
        cells, pairs = experiment_cells(args.experiment, mrc_reset)
    elif args.config:
        scenario = load_scenario(args.config)
        cell = harness.CellSpec(
            scenario.space.width, scenario.space.height, scenario.space.preset_name,
            scenario.n_users, scenario.steering, scenario.reset,
        )
        cells, pairs = [cell], []
    else:
        print("evaluate requires --experiment or --config", file=sys.stderr)
        return 2
    config = ExperimentConfig(
        cells=cells,
        trials=args.trials or 100,
        path_waypoints=args.waypoints,
        seed=args.seed or 0,
        pairs=pairs,
    )
    table = run_experiment(config, policy=policy)
    out = args.out or Path("results.json")
    export_results(table, out, format="json")
    export_results(table, Path(str(out).removesuffix(".json") + ".csv"), format="csv")
    print(summarize(table))
    print(f"results -> {out}")
    return 0


def cmd_report(args) -> int:
    table = import_results(args.results)
    if args.out:
        export_results(table, args.out, format="csv")
    print(summarize(table))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _apply_determinism(args)
    handlers = {
        "simulate": cmd_simulate,
        "train": cmd_train,
        "evaluate": cmd_evaluate,
        "report": cmd_report,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
