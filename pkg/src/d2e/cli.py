"""Command-line surface.

Subcommands: ``train`` (full loop), ``eval`` (checkpoint rollout returns),
``sysid`` (dynamics model alone on a synthetic system), ``cluster``
(encoder alone on synthetic mixture data), ``plot`` (static SVG from
metrics files).  Errors print one machine-parseable line to stderr and
exit nonzero; reruns with the same seed overwrite outputs with identical
bytes (apart from wall-clock fields inside metrics).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import RunConfig, config_echo, parse_config
from .envs import make_env, make_sysid_dataset
from .errors import D2EError
from .numerics.rng import RngStream


def _build_agent(config: RunConfig):
    from .trainer import D2EAgent

    env = make_env(config.env)
    return D2EAgent(env, config.igmm, config.rgp, config.planner, config.train)


def cmd_train(args) -> int:
    config = parse_config(args.config, args.set)
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "config_effective.txt"), "w") as f:
        f.write(config_echo(config))
    agent = _build_agent(config)
    from .trainer import load_agent, run_d2e

    ckpt = os.path.join(config.out_dir, "checkpoint.d2e")
    if args.resume and os.path.exists(ckpt):
        load_agent(agent, ckpt)
    report = run_d2e(
        agent,
        metrics_path=os.path.join(config.out_dir, "metrics.jsonl"),
        checkpoint_path=ckpt,
    )
    print(json.dumps({"final_eval": report["final_eval"]}, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    config = parse_config(args.config, args.set)
    agent = _build_agent(config)
    from .trainer import evaluate, load_agent

    load_agent(agent, args.checkpoint)
    out = evaluate(agent, args.episodes, label="cli")
    print(json.dumps({"mean_return": out["eval_return"], "sd": out["eval_sd"],
                      "episodes": args.episodes}, sort_keys=True))
    return 0


def cmd_sysid(args) -> int:
    config = parse_config(args.config, args.set)
    os.makedirs(config.out_dir, exist_ok=True)
    from .trainer import fit_sysid

    rng = RngStream(config.seed).split("sysid-data")
    dataset = make_sysid_dataset(args.system, args.length, args.noise_std, rng)
    report = fit_sysid(dataset, n_inducing=config.rgp.n_inducing, seed=config.seed,
                       steps=args.steps)
    out = {
        "system": args.system,
        "noise_std": args.noise_std,
        "train_rmse": report["train_rmse"],
        "test_rmse": report["test_rmse"],
    }
    with open(os.path.join(config.out_dir, "sysid.json"), "w") as f:
        json.dump(out, f, sort_keys=True, indent=2)
    print(json.dumps(out, sort_keys=True))
    return 0


def make_cluster_data(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Three well-separated 2-D Gaussians with equal weights."""
    rng = RngStream(seed).split("cluster-data")
    centers = np.array([[0.0, 3.0], [-3.0, -2.0], [3.0, -2.0]])
    labels = np.asarray(rng.integers(0, 3, (n,)))
    points = centers[labels] + 0.35 * rng.normal((n, 2))
    return points, labels


def cmd_cluster(args) -> int:
    config = parse_config(args.config, args.set)
    os.makedirs(config.out_dir, exist_ok=True)
    from dataclasses import replace

    from .igmm import (
        IgmmConfig,
        cluster_purity,
        expected_theta,
        fit_clustering,
        hard_assignments,
    )

    data, labels = make_cluster_data(args.points, config.seed)
    igmm_config = replace(config.igmm, obs_dim=2, encoder_kind="mlp")
    params, history = fit_clustering(data, igmm_config, seed=config.seed,
                                     steps=args.steps)
    assignments = hard_assignments(params, igmm_config, data)
    theta = expected_theta(params, igmm_config, data)
    out = {
        "purity": cluster_purity(assignments, labels),
        "occupied_components": int(np.sum(theta > 0.05)),
        "theta": [round(float(t), 6) for t in theta],
        "final_loss": history[-1],
    }
    with open(os.path.join(config.out_dir, "cluster.json"), "w") as f:
        json.dump(out, f, sort_keys=True, indent=2)
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_plot(args) -> int:
    from .plotting import read_metric_series, render_series_svg

    series = []
    for path in args.metrics:
        xs, ys = read_metric_series(path, field=args.field)
        if not xs:
            raise D2EError(f"no '{args.field}' rows found in {path}")
        series.append({"label": os.path.basename(path), "x": xs, "y": ys})
    svg = render_series_svg(series, title=args.field, x_label="iteration",
                            y_label=args.field)
    with open(args.out, "w") as f:
        f.write(svg)
    print(json.dumps({"out": args.out, "series": len(series)}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d2e", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the full training loop")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="k=v")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="k=v")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sysid", help="fit the dynamics model alone")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="k=v")
    p.add_argument("--system", default="kink", choices=["kink", "pendulum-passive"])
    p.add_argument("--length", type=int, default=500)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=1000)
    p.set_defaults(fn=cmd_sysid)

    p = sub.add_parser("cluster", help="fit the encoder alone on mixture data")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="k=v")
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--steps", type=int, default=1500)
    p.set_defaults(fn=cmd_cluster)

    p = sub.add_parser("plot", help="render metrics curves to SVG")
    p.add_argument("metrics", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--field", default="eval_return")
    p.set_defaults(fn=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (D2EError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
