"""Command-line interface: gen / train / eval / render.

Exit codes: 0 success, 2 usage or I/O problem, 3 training configuration
problem (e.g. tmedirl on a dataset without energy labels), 4 numeric abort
(message names the sample), 5 evaluation mismatch (checkpoint/data shapes
or missing test split).  All commands are deterministic given their flags;
randomness flows from --seed only.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import dataio, metrics, render
from .errors import ConfigError, DataFormatError, GridError, NumericError, ShapeError
from .grid import GridMdp, GridSpec
from .models import make_model, param_init
from .solver import policy_propagation, soft_value_iteration
from .synth import WorldSpec, gen_dataset
from .training import TrainConfig, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="travirl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--rows", type=int, default=16)
    p.add_argument("--cols", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.0, help="demonstrator temperature")
    p.add_argument("--noise", type=float, default=0.0, help="energy label noise std")
    p.add_argument("--split-ratio", type=float, default=0.7)
    p.add_argument("--obstacle-density", type=float, default=0.08)
    p.add_argument("--roughness", type=float, default=0.3)
    p.add_argument("--imu-len", type=int, default=64)

    p = sub.add_parser("train", help="train a reward model on a dataset")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--algo", choices=("medirl", "tmedirl"), default="medirl")
    p.add_argument("--model", choices=("linear", "fusion"), default="linear")
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path (report lands at <out>.report.csv)")
    p.add_argument("--sweeps", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--dropout", type=float, default=0.0)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True, help="report prefix (<out>.json and <out>.csv)")
    p.add_argument("--rollouts", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--uniform-baseline", action="store_true",
                   help="score the uniform policy instead of the learned one")

    p = sub.add_parser("render", help="render reward maps and the demo overlay")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--sample", type=int, required=True, help="sample id to render")
    p.add_argument("--out", required=True, help="output file prefix")
    return parser


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_gen(args) -> int:
    try:
        spec = WorldSpec(
            rows=args.rows,
            cols=args.cols,
            seed=args.seed,
            obstacle_density=args.obstacle_density,
            roughness=args.roughness,
            beta=args.beta,
            energy_noise=args.noise,
            imu_len=args.imu_len,
        )
        samples = gen_dataset(spec, args.count, args.split_ratio)
    except (ConfigError, GridError) as err:
        return _fail(2, str(err))
    try:
        dataio.save_dataset(args.out, samples)
    except OSError as err:
        return _fail(2, f"cannot write to {args.out}: {err}")
    n_train = sum(1 for s in samples if s.split == "train")
    print(f"wrote {len(samples)} samples ({n_train} train, {len(samples) - n_train} test) to {args.out}")
    return 0


def cmd_train(args) -> int:
    try:
        samples = dataio.load_dataset(args.data)
    except DataFormatError as err:
        return _fail(2, str(err))
    if not samples:
        return _fail(2, f"dataset {args.data} is empty")
    first = samples[0]
    model = make_model(args.model, first.features.rows, first.features.cols, len(first.imu))
    param_init(model, args.seed)
    try:
        cfg = TrainConfig(
            algorithm=args.algo,
            lr=args.lr,
            iterations=args.iters,
            seed=args.seed,
            gamma=args.gamma,
            sweeps=args.sweeps,
            tol=args.tol,
            weight_decay=args.weight_decay,
            dropout=args.dropout,
        )
        _params, report = train(model, samples, cfg)
    except ConfigError as err:
        return _fail(3, str(err))
    except NumericError as err:
        return _fail(4, f"numeric abort: {err}")
    try:
        dataio.save_checkpoint(args.out, model, args.gamma)
        report.to_csv(f"{args.out}.report.csv")
    except OSError as err:
        return _fail(2, f"cannot write checkpoint: {err}")
    print(f"checkpoint: {args.out} ({len(report)} iterations)")
    return 0


def cmd_eval(args) -> int:
    try:
        samples = dataio.load_dataset(args.data)
        model, gamma = dataio.load_checkpoint(args.ckpt)
    except DataFormatError as err:
        return _fail(2, str(err))
    test = [s for s in samples if s.split == "test"]
    if not test:
        return _fail(5, f"dataset {args.data} has no test split")
    first = test[0]
    if (first.features.rows, first.features.cols) != (model.rows, model.cols) or len(
        first.imu
    ) != model.imu_len:
        return _fail(
            5,
            f"checkpoint expects {model.rows}x{model.cols} (T={model.imu_len}), dataset has "
            f"{first.features.rows}x{first.features.cols} (T={len(first.imu)})",
        )
    if args.uniform_baseline:
        report = _uniform_baseline_report(model, samples, gamma, args.rollouts, args.seed)
    else:
        try:
            report = metrics.evaluate(model, samples, gamma, rollouts=args.rollouts, seed=args.seed)
        except (ShapeError, ConfigError) as err:
            return _fail(5, str(err))
    report.to_json(f"{args.out}.json")
    report.to_csv(f"{args.out}.csv")
    print(", ".join(f"{k}={v}" for k, v in report.as_dict().items()))
    return 0


def _uniform_baseline_report(model, samples, gamma, rollouts, seed):
    """EvalReport of the uniform policy: NLL and HD only."""
    test = [s for s in samples if s.split == "test"]
    mdp = GridMdp(GridSpec(rows=model.rows, cols=model.cols, gamma=gamma))
    policy = metrics.uniform_policy(mdp)
    nlls, hds = [], []
    for k, sample in enumerate(test):
        demo = sample.trajectory
        nlls.append(metrics.nll(mdp, policy, demo))
        rng = np.random.default_rng(seed + k)
        horizon = 4 * (mdp.rows + mdp.cols)
        hds.append(
            float(
                np.mean(
                    [
                        metrics.hausdorff(
                            demo.cells(),
                            metrics.sample_path(mdp, policy, demo.start.cell, horizon, rng).cells(),
                        )
                        for _ in range(rollouts)
                    ]
                )
            )
        )
    return metrics.EvalReport(nll=float(np.mean(nlls)), hd=float(np.mean(hds)))


def cmd_render(args) -> int:
    try:
        samples = dataio.load_dataset(args.data)
        model, gamma = dataio.load_checkpoint(args.ckpt)
    except DataFormatError as err:
        return _fail(2, str(err))
    by_id = {s.sample_id: s for s in samples}
    if args.sample not in by_id:
        return _fail(2, f"sample {args.sample} not in dataset (ids: 0..{max(by_id)})")
    sample = by_id[args.sample]
    if (sample.features.rows, sample.features.cols) != (model.rows, model.cols):
        return _fail(5, "checkpoint and sample shapes do not match")

    mdp = GridMdp(GridSpec(rows=model.rows, cols=model.cols, gamma=gamma))
    maps = model.forward(sample.features, sample.imu)
    model.pop_cache()
    solution = soft_value_iteration(mdp, maps)
    start = np.zeros(mdp.n_cells)
    first = sample.trajectory.start
    start[mdp.cell_index(first.row, first.col)] = 1.0
    expected_path, _ = policy_propagation(
        mdp, solution.policy, start, horizon=4 * (mdp.rows + mdp.cols)
    )

    render.write_pgm(f"{args.out}_path.pgm", maps.path)
    render.write_pgm(f"{args.out}_goal.pgm", maps.goal)
    render.write_pgm(f"{args.out}_svf.pgm", expected_path.reshape(mdp.rows, mdp.cols))
    render.write_ppm(
        f"{args.out}_overlay.ppm",
        render.trajectory_overlay(sample.features.color, sample.trajectory),
    )
    print(f"wrote {args.out}_{{path,goal,svf}}.pgm and {args.out}_overlay.ppm")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for usage errors
        return int(exc.code) if exc.code else 0
    handlers = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "render": cmd_render}
    return handlers[args.command](args)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
