"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 validation error,
3 runtime/divergence error. TRAJAUDIT_THREADS caps worker parallelism
when auditing several presets in one invocation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import multiprocessing
import os
import pathlib
import sys

from trajaudit import attacks, dp, harness, metrics, targets, trajectory
from trajaudit.errors import ConfigError, RuntimeFailure, ValidationError

EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _experiment_config(args) -> harness.ExperimentConfig:
    if args.preset and args.config:
        raise ConfigError("give either --preset or --config, not both")
    if args.preset:
        config = harness.get_preset(args.preset)
    elif args.config:
        config = harness.load_config(args.config)
    else:
        raise ConfigError("one of --preset or --config is required")
    if args.seed is not None:
        config = dataclasses.replace(config, master_seed=args.seed)
    return config


def _add_experiment_args(p):
    p.add_argument("--preset", help="bundled experiment preset name")
    p.add_argument("--config", help="experiment config JSON path")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", required=True, help="output directory")


def cmd_gen_data(args) -> int:
    trajs = trajectory.synth_mobility(
        args.n, args.seq_len, args.seed if args.seed is not None else 0,
        n_anchors=args.anchors, step_scale=args.step_scale,
    )
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "trajectories.csv"
    trajectory.save_trajectories(trajs, path)
    print(f"wrote {len(trajs)} trajectories to {path}")
    return 0


def cmd_train(args) -> int:
    config = _experiment_config(args)
    dataset = harness.build_dataset(config)
    target = harness.train_target(config, dataset)
    targets.save_target(target, args.out)
    print(f"trained {config.family} target ({config.name}) -> {args.out}")
    return 0


def cmd_attack(args) -> int:
    config = _experiment_config(args)
    target = targets.load_target(args.model)
    dataset = harness.build_dataset(config)
    attack_cfg = dataclasses.replace(
        config.attack, seed=harness.stage_seed(config.master_seed, "attack")
    )
    samples = attacks.run_attack(target, dataset, attack_cfg)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "scored_samples.csv"
    attacks.save_scores(samples, path)
    print(f"scored {len(samples)} samples -> {path}")
    return 0


def cmd_report(args) -> int:
    samples = attacks.load_scores(args.scores)
    curve = metrics.roc_curve(samples)
    audit_metrics = metrics.compute_metrics(samples)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    metrics.save_roc_csv(curve, out / "roc.csv")
    summary = {
        "source": str(args.scores),
        "auc": audit_metrics.auc,
        "tpr_at_fpr": {repr(k): v for k, v in audit_metrics.tpr_at_fpr.items()},
        "n_members": audit_metrics.n_members,
        "n_non_members": audit_metrics.n_non_members,
        "toolkit_version": harness.__version__,
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _run_one(item):
    config, out_dir = item
    report = harness.run_experiment(config, out_dir)
    return config.name, report.metrics.auc


def cmd_audit(args) -> int:
    if args.preset:
        names = args.preset
        configs = [harness.get_preset(n) for n in names]
    elif args.config:
        configs = [harness.load_config(args.config)]
    else:
        raise ConfigError("one of --preset or --config is required")
    if args.seed is not None:
        configs = [dataclasses.replace(c, master_seed=args.seed) for c in configs]
    out = pathlib.Path(args.out)
    jobs = [(c, out / c.name) for c in configs]
    threads = int(os.environ.get("TRAJAUDIT_THREADS", "1"))
    if len(jobs) > 1 and threads > 1:
        with multiprocessing.Pool(min(threads, len(jobs))) as pool:
            results = pool.map(_run_one, jobs)
    else:
        results = [_run_one(j) for j in jobs]
    for name, auc in results:
        print(f"{name}: auc={auc:.4f} -> {out / name}")
    return 0


def cmd_verify_dp(args) -> int:
    mech_spec = json.loads(pathlib.Path(args.mechanism).read_text())
    mech = dp.DiscreteMechanism(
        tuple(mech_spec["datasets"]), tuple(mech_spec["outputs"]),
        mech_spec["probs"],
    )
    adjacency = [tuple(pair) for pair in mech_spec.get("adjacency", [])]
    if args.adjacent:
        adjacency = [tuple(p.split(",")) for p in args.adjacent]
    if not adjacency:
        raise ConfigError("no adjacency pairs: add an 'adjacency' list or --adjacent A,B")
    verdict = dp.verify_dp(mech, adjacency, args.epsilon, args.delta)
    print(json.dumps({
        "holds": verdict.holds,
        "epsilon": args.epsilon,
        "delta": args.delta,
        "witness": verdict.witness,
    }))
    return 0


def cmd_compare(args) -> int:
    a = harness.AuditReport.load(args.report_a)
    b = harness.AuditReport.load(args.report_b)
    print(json.dumps(harness.compare_reports(a, b), indent=2, sort_keys=True))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="trajaudit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="emit a synthetic trajectory CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--seq-len", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--anchors", type=int, default=3)
    p.add_argument("--step-scale", type=float, default=0.05)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a target model, emit a checkpoint")
    _add_experiment_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("attack", help="run the attack, emit scored samples")
    _add_experiment_args(p)
    p.add_argument("--model", required=True, help="target checkpoint directory")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("report", help="metrics + ROC CSV from scored samples")
    p.add_argument("--scores", required=True, help="scored-sample CSV path")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("audit", help="full pipeline: data, train, attack, report")
    p.add_argument("--preset", action="append", help="preset name (repeatable)")
    p.add_argument("--config", help="experiment config JSON path")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("verify-dp", help="brute-force (eps, delta)-DP check")
    p.add_argument("--mechanism", required=True, help="mechanism JSON path")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--adjacent", action="append",
                   help="adjacent dataset pair 'A,B' (repeatable)")
    p.set_defaults(func=cmd_verify_dp)

    p = sub.add_parser("compare", help="diff two audit reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"trajaudit: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeFailure as exc:
        print(f"trajaudit: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"trajaudit: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
