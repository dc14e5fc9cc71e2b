"""Evaluation of learned rewards and policies.

Offers the per-quantity metrics (demonstration NLL, Hausdorff distance,
energy-ranking classification accuracy, greedy path planning, Spearman rank
correlation against synthetic ground truth) plus an ``evaluate`` driver that
aggregates them over the test split of a dataset.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, ShapeError
from .grid import Action, GridMdp, GridSpec, State, Trajectory
from .ranking import path_return
from .solver import policy_propagation, soft_value_iteration

EVAL_KEYS = ("nll", "hd", "rank_acc", "mean_aec", "spearman")


@dataclass
class EvalReport:
    """Aggregated test-split metrics.  ``rank_acc``/``mean_aec``/``spearman``
    are None when the dataset lacks energy labels or ground-truth cost."""

    nll: float
    hd: float
    rank_acc: float = None
    mean_aec: float = None
    spearman: float = None

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in EVAL_KEYS}

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.as_dict(), fh, indent=2)
            fh.write("\n")

    def to_csv(self, path) -> None:
        def fmt(v):
            return "" if v is None else f"{v:.12g}"

        with open(path, "w") as fh:
            fh.write(",".join(EVAL_KEYS) + "\n")
            fh.write(",".join(fmt(getattr(self, k)) for k in EVAL_KEYS) + "\n")


def nll(mdp: GridMdp, policy: np.ndarray, traj: Trajectory) -> float:
    """Mean per-step negative log likelihood of a demonstration under a
    policy, final END included.  A zero-probability demonstrated action
    yields +inf."""
    total = 0.0
    for s, a in traj.steps:
        p = policy[mdp.cell_index(s.row, s.col), a]
        if p <= 0.0:
            return math.inf
        total -= math.log(p)
    return total / len(traj.steps)


def uniform_policy(mdp: GridMdp) -> np.ndarray:
    """Equal probability over the available actions of every cell."""
    counts = mdp.move_ok.sum(axis=1, keepdims=True)
    policy = mdp.move_ok.astype(np.float64) / counts
    return policy


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance between two nonempty cell sets, with
    Euclidean distance in cell coordinates."""
    pa = np.asarray(sorted(set(map(tuple, a))), dtype=np.float64)
    pb = np.asarray(sorted(set(map(tuple, b))), dtype=np.float64)
    if pa.size == 0 or pb.size == 0:
        raise ConfigError("hausdorff distance needs nonempty sets")
    d = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2))
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def rank_accuracy(returns, aecs) -> float:
    """Fraction of distinct-AEC test pairs where the higher predicted
    return has the smaller AEC; return ties count as incorrect."""
    returns = np.asarray(returns, dtype=np.float64)
    aecs = np.asarray(aecs, dtype=np.float64)
    if returns.shape != aecs.shape:
        raise ShapeError("returns and AEC labels must align")
    correct = 0
    total = 0
    n = len(returns)
    for i in range(n):
        for j in range(i + 1, n):
            if aecs[i] == aecs[j]:
                continue
            total += 1
            lo, hi = (i, j) if aecs[i] > aecs[j] else (j, i)
            if returns[hi] > returns[lo]:
                correct += 1
    if total == 0:
        raise ConfigError("no test pairs with distinct AEC")
    return correct / total


def plan_path(mdp: GridMdp, policy: np.ndarray, start: tuple, horizon: int) -> Trajectory:
    """Most-likely rollout: argmax action at every cell (ties to the lowest
    action code), with END forced once the horizon is reached."""
    row, col = start
    steps = []
    for t in range(horizon):
        cell = mdp.cell_index(row, col)
        if t == horizon - 1:
            action = Action.END
        else:
            action = Action(int(np.argmax(policy[cell])))
        steps.append((State.path(row, col), action))
        if action is Action.END:
            break
        nxt = mdp.move_succ[cell, action]
        row, col = int(nxt) // mdp.cols, int(nxt) % mdp.cols
    return Trajectory(steps=steps, terminal=State.goal(steps[-1][0].row, steps[-1][0].col))


def sample_path(mdp: GridMdp, policy: np.ndarray, start: tuple, horizon: int, rng) -> Trajectory:
    """Stochastic rollout of the policy, END forced at the horizon."""
    row, col = start
    steps = []
    for t in range(horizon):
        cell = mdp.cell_index(row, col)
        if t == horizon - 1:
            action = Action.END
        else:
            action = Action(int(rng.choice(mdp.n_actions, p=policy[cell])))
        steps.append((State.path(row, col), action))
        if action is Action.END:
            break
        nxt = mdp.move_succ[cell, action]
        row, col = int(nxt) // mdp.cols, int(nxt) % mdp.cols
    return Trajectory(steps=steps, terminal=State.goal(steps[-1][0].row, steps[-1][0].col))


def spearman(learned, gt) -> float:
    """Spearman rank correlation between two maps, average-rank ties."""
    a = np.asarray(learned, dtype=np.float64).reshape(-1)
    b = np.asarray(gt, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"maps differ in size: {a.size} vs {b.size}")
    if np.unique(a).size < 2 or np.unique(b).size < 2:
        raise ConfigError("spearman correlation is undefined for a constant map")
    ra, rb = rankdata(a), rankdata(b)
    return float(np.corrcoef(ra, rb)[0, 1])


@dataclass
class SampleEval:
    nll: float
    hd: float
    predicted_return: float
    label_aec: float
    planned_aec: float
    spearman: float


def evaluate_sample(model, sample, gamma: float, sweeps=None, tol: float = 1e-6,
                    rollouts: int = 16, seed: int = 0) -> SampleEval:
    """All per-sample metrics under the model's reward prediction."""
    from .synth import gen_energy  # planned-path energy at zero noise

    mdp = GridMdp(GridSpec(rows=model.rows, cols=model.cols, gamma=gamma))
    maps = model.forward(sample.features, sample.imu)
    model.pop_cache()
    solution = soft_value_iteration(mdp, maps, sweeps=sweeps, tol=tol)

    demo = sample.trajectory
    nll_value = nll(mdp, solution.policy, demo)

    rng = np.random.default_rng(seed)
    start = demo.start.cell
    horizon = 4 * (mdp.rows + mdp.cols)
    demo_cells = demo.cells()
    hd_value = float(
        np.mean(
            [
                hausdorff(demo_cells, sample_path(mdp, solution.policy, start, horizon, rng).cells())
                for _ in range(rollouts)
            ]
        )
    )

    planned_aec = None
    spearman_value = None
    if sample.gt_cost is not None:
        planned = plan_path(mdp, solution.policy, start, horizon)
        _log, planned_aec = gen_energy(sample.gt_cost, planned, 0.0, seed=0)
        spearman_value = spearman(-maps.path, sample.gt_cost)

    return SampleEval(
        nll=nll_value,
        hd=hd_value,
        predicted_return=path_return(maps.path, demo),
        label_aec=demo.aec,
        planned_aec=planned_aec,
        spearman=spearman_value,
    )


def evaluate(model, dataset, gamma: float, sweeps=None, tol: float = 1e-6,
             rollouts: int = 16, seed: int = 0, max_workers: int = None) -> EvalReport:
    """Aggregate metrics over the test split.

    Per-sample work is pure and runs in up to ``max_workers`` threads
    (default: the TRAV_THREADS environment variable, else 1); results do not
    depend on the worker count.
    """
    test = [s for s in dataset if s.split == "test"]
    if not test:
        raise ConfigError("dataset has no test split")
    if max_workers is None:
        max_workers = max(1, int(os.environ.get("TRAV_THREADS", "1")))

    def run(item):
        k, sample = item
        return evaluate_sample(model, sample, gamma, sweeps=sweeps, tol=tol,
                               rollouts=rollouts, seed=seed + k)

    if max_workers > 1:
        # per-sample forwards need their own activation storage
        from copy import deepcopy

        models = [deepcopy(model) for _ in range(len(test))]

        def run(item):  # noqa: F811
            k, sample = item
            return evaluate_sample(models[k], sample, gamma, sweeps=sweeps, tol=tol,
                                   rollouts=rollouts, seed=seed + k)

        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            evals = list(pool.map(run, enumerate(test)))
    else:
        evals = [run(item) for item in enumerate(test)]

    rank_acc = None
    if all(e.label_aec is not None for e in evals) and len(evals) >= 2:
        aecs = [e.label_aec for e in evals]
        if len(set(aecs)) >= 2:
            rank_acc = rank_accuracy([e.predicted_return for e in evals], aecs)
    mean_aec = None
    if all(e.planned_aec is not None for e in evals):
        mean_aec = float(np.mean([e.planned_aec for e in evals]))
    spearman_value = None
    if all(e.spearman is not None for e in evals):
        spearman_value = float(np.mean([e.spearman for e in evals]))

    return EvalReport(
        nll=float(np.mean([e.nll for e in evals])),
        hd=float(np.mean([e.hd for e in evals])),
        rank_acc=rank_acc,
        mean_aec=mean_aec,
        spearman=spearman_value,
    )
