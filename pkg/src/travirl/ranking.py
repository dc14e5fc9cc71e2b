"""Locomotion energy and pairwise trajectory-ranking loss.

Trajectory energy is the summed dot product of absolute joint torques and
absolute joint displacements per time stamp; dividing by trajectory length
gives the average energy consumption (AEC) used as the preference label:
a lower AEC ranks a trajectory higher.

The ranking loss on a preference pair is the logistic loss on the return
difference, log(1 + exp(G_low - G_high)), where each return is the plain
(undiscounted) sum of predicted path rewards over the cells the trajectory
visits, counted with multiplicity.  This is deliberately not the discounted
MDP return: the goal reward is received once and carries no ranking signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .grid import Trajectory


@dataclass
class JointLog:
    """Aligned joint torques [N*m] and displacements [rad], each (n, m) for
    n time stamps of m joints."""

    torques: np.ndarray
    displacements: np.ndarray

    def __post_init__(self):
        self.torques = np.asarray(self.torques, dtype=np.float64)
        self.displacements = np.asarray(self.displacements, dtype=np.float64)
        if self.torques.shape != self.displacements.shape or self.torques.ndim != 2:
            raise ShapeError(
                f"torques {self.torques.shape} and displacements "
                f"{self.displacements.shape} must share an (n, m) shape"
            )
        if not (np.isfinite(self.torques).all() and np.isfinite(self.displacements).all()):
            raise NumericError("joint log contains non-finite values")


@dataclass(frozen=True)
class RankPair:
    """Preference pair of trajectory indices: ``high`` is preferred over
    ``low`` (strictly smaller AEC)."""

    low: int
    high: int

    def __post_init__(self):
        if self.low == self.high:
            raise ConfigError("a ranking pair needs two distinct trajectories")


def trajectory_energy(log: JointLog) -> float:
    """Sum over time stamps of <|torque|, |displacement|>."""
    return float(np.sum(np.abs(log.torques) * np.abs(log.displacements)))


def aec(energy: float, length: int) -> float:
    """Average energy consumption: total energy over path step count."""
    if length < 1:
        raise ConfigError(f"trajectory length must be >= 1, got {length}")
    if energy < 0:
        raise ConfigError(f"energy must be nonnegative, got {energy}")
    return energy / length


def _sigmoid(x: float) -> float:
    if x >= 0:
        z = np.exp(-x)
        return 1.0 / (1.0 + z)
    z = np.exp(x)
    return z / (1.0 + z)


def ranking_loss(g_low: float, g_high: float):
    """Logistic preference loss and its gradients.

    ``g_low``/``g_high`` are the predicted returns of the lower- and
    higher-ranked trajectory.  Returns (loss, dL/dg_low, dL/dg_high);
    the two gradients sum to zero exactly.
    """
    if not (np.isfinite(g_low) and np.isfinite(g_high)):
        raise NumericError("ranking loss needs finite returns")
    d = g_low - g_high
    # softplus(d), overflow-safe on both sides
    loss = float(np.logaddexp(0.0, d))
    s = _sigmoid(d)
    return loss, s, -s


def path_return(path_rewards: np.ndarray, traj: Trajectory) -> float:
    """Undiscounted sum of path rewards over the visited cells (multiset)."""
    path_rewards = np.asarray(path_rewards, dtype=np.float64)
    total = 0.0
    for r, c in traj.cells():
        total += path_rewards[r, c]
    return float(total)


def visit_map(traj: Trajectory, rows: int, cols: int, weight: float = 1.0) -> np.ndarray:
    """Per-cell visit multiplicity of a trajectory, scaled by ``weight``.
    This is d(path_return)/d(path reward) times the weight."""
    out = np.zeros((rows, cols))
    for r, c in traj.cells():
        out[r, c] += weight
    return out


def rank_pairs(demos, count: int, seed: int):
    """Sample ``count`` preference pairs from AEC-labeled trajectories.

    Pairs with equal AEC are skipped and resampled; each emitted pair is
    oriented so the lower-AEC trajectory is ``high``.  Deterministic for a
    given seed.
    """
    labeled = [(i, t.aec) for i, t in enumerate(demos) if t.aec is not None]
    if len(labeled) < 2:
        raise ConfigError("need at least two AEC-labeled trajectories")
    if len({a for _, a in labeled}) < 2:
        raise ConfigError("need at least two distinct AEC values to rank")
    rng = np.random.default_rng(seed)
    idx = [i for i, _ in labeled]
    by_index = dict(labeled)
    pairs = []
    while len(pairs) < count:
        i, j = rng.choice(len(idx), size=2, replace=False)
        a, b = int(idx[i]), int(idx[j])
        if by_index[a] == by_index[b]:
            continue
        if by_index[a] > by_index[b]:
            pairs.append(RankPair(low=a, high=b))
        else:
            pairs.append(RankPair(low=b, high=a))
    return pairs
