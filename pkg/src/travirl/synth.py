"""Synthetic worlds with known ground-truth traversability cost.

Stands in for a robot dataset: each sample bundles terrain features, an
inertial window, a demonstrated trajectory with an energy label, and the
ground-truth cost field the generator used, so learned rewards can be scored
absolutely.  Everything is a pure function of (spec, seed).

Generator model, with fixed constants below:

* elevation is smoothed seeded noise scaled by the roughness knob; slope is
  its per-cell gradient magnitude,
* elevation variance is roughness * slope plus a bump on obstacle cells,
* gt_cost = C0 + C1 * variance + C2 * slope + C_OBS * [obstacle],
* colors encode the terrain class (smooth / rough / obstacle) with jitter,
* demonstrations sample a soft-value-iteration policy on reward = -gt_cost
  with a seeded goal-bonus field, softened by a temperature: 0 gives the
  greedy demonstrator, larger values give increasingly sloppy ones,
* per-step locomotion energy is ENERGY_SCALE * gt_cost of the crossed cell
  plus optional truncated Gaussian noise, realized as a 12-joint log whose
  torque rows are scaled to hit that target exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError, GridError
from .grid import Action, GridMdp, GridSpec, State, Trajectory
from .models import FeatureStack, ImuWindow, RewardMaps
from .ranking import JointLog, aec, trajectory_energy
from .solver import soft_value_iteration

# cost model constants
C0 = 0.2
C1 = 5.0
C2 = 2.0
C_OBS = 10.0
OBSTACLE_VAR_BUMP = 0.25
ROUGH_VAR_THRESH = 0.02
NOISE_SIGMA = 2.0  # smoothing of the elevation noise, in cells

# worlds have a crater profile: a costly central mound (where the robot
# starts), a thin cheap moat around it, then terrain rising again outside.
# Walks that stop in the moat are short and cheap; walks that overshoot or
# dither pay.  All knobs scale with the roughness setting.
CONE_HEIGHT = 3.0
CONE_RADIUS_FRAC = 0.30
MOAT_WIDTH = 2.0
OUTER_GRAD = 0.45

# demonstrator constants.  The stop bonus must beat the soft policy's
# per-step entropy gain (about log 5) by a wide margin, otherwise the
# maximum-entropy demonstrator wanders until the horizon cap.  Each
# demonstration draws its own seeded goal field: usually the bonus sits on
# the cheapest fraction of cells, but some operators get distracted and
# park on rough (still passable) ground instead -- feasible behavior with
# needlessly high energy cost, which is what the ranking loss is for.
# Both placements are functions of the terrain features, so a reward model
# can predict where demonstrations stop.  A small exclusion zone around the
# start keeps demonstrations from stopping on the spot.
DEMO_GAMMA = 0.95
GOAL_BASE = -8.0
GOAL_BONUS = 64.0
GOAL_QUANTILE = 0.08
GOAL_EXCLUDE_DIV = 4  # exclusion radius: min(rows, cols) // this
BAIT_PROB = 0.5  # distracted-stop rate of the suboptimal demonstrator
BAIT_QUANTILE = 0.12  # roughest passable fraction eligible for bait stops

# inertial window constants: noise spread follows the traversed terrain.
# The gain makes the window's vibration level a usable per-sample signal of
# the crossed terrain; at small gains the channel is too faint for ranking
# to be learnable at practical step sizes.
IMU_STD_BASE = 0.05
IMU_VAR_GAIN = 2.0
GRAVITY = 9.81

# energy model constants
ENERGY_SCALE = 0.05
N_JOINTS = 12
_DQ_PATTERN = np.linspace(0.02, 0.06, N_JOINTS)
_JOINT_SIGNS = np.where(np.arange(N_JOINTS) % 2 == 0, 1.0, -1.0)

# color classes (R, G, B) before jitter
_COLOR_SMOOTH = np.array([0.20, 0.65, 0.25])
_COLOR_ROUGH = np.array([0.55, 0.45, 0.25])
_COLOR_OBSTACLE = np.array([0.75, 0.20, 0.15])
COLOR_JITTER = 0.05


@dataclass(frozen=True)
class WorldSpec:
    """Knobs of the synthetic generator."""

    rows: int
    cols: int
    seed: int = 0
    obstacle_density: float = 0.08
    roughness: float = 0.3
    beta: float = 0.0
    energy_noise: float = 0.0
    imu_len: int = 64

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError(f"world must have positive dims, got {self.rows}x{self.cols}")
        if not (0.0 <= self.obstacle_density <= 1.0):
            raise ConfigError(f"obstacle density must be in [0,1], got {self.obstacle_density}")
        if self.roughness < 0 or self.beta < 0 or self.energy_noise < 0:
            raise ConfigError("roughness, beta and energy noise must be nonnegative")
        if self.imu_len < 8:
            raise ConfigError(f"imu_len must be >= 8, got {self.imu_len}")


@dataclass
class SynthSample:
    """One generated training/evaluation item."""

    sample_id: int
    features: FeatureStack
    imu: ImuWindow
    trajectory: Trajectory
    gt_cost: np.ndarray
    split: str


def gen_world(spec: WorldSpec):
    """Build (FeatureStack, gt_cost) for one world."""
    rng = np.random.default_rng(spec.seed)
    n, m = spec.rows, spec.cols

    noise = rng.standard_normal((n, m))
    base = gaussian_filter(noise, sigma=NOISE_SIGMA, mode="reflect")
    peak = np.abs(base).max()
    if peak > 0:
        base = base / peak
    rr, cc = np.indices((n, m))
    dist = np.hypot(rr - (n - 1) / 2.0, cc - (m - 1) / 2.0)
    radius = max(CONE_RADIUS_FRAC * min(n, m), 1.0)
    cone = CONE_HEIGHT * spec.roughness * np.clip(1.0 - dist / radius, 0.0, None)
    outer = OUTER_GRAD * spec.roughness * np.clip(dist - (radius + MOAT_WIDTH), 0.0, None)
    elevation = spec.roughness * base + cone + outer
    gy = np.gradient(elevation, axis=0) if n > 1 else np.zeros((n, m))
    gx = np.gradient(elevation, axis=1) if m > 1 else np.zeros((n, m))
    slope = np.hypot(gy, gx)

    obstacles = rng.random((n, m)) < spec.obstacle_density
    variance = spec.roughness * slope + OBSTACLE_VAR_BUMP * obstacles
    gt_cost = C0 + C1 * variance + C2 * slope + C_OBS * obstacles

    color = np.where(
        obstacles[None, :, :],
        _COLOR_OBSTACLE[:, None, None],
        np.where(
            (variance > ROUGH_VAR_THRESH)[None, :, :],
            _COLOR_ROUGH[:, None, None],
            _COLOR_SMOOTH[:, None, None],
        ),
    )
    color = np.clip(color + rng.uniform(-COLOR_JITTER, COLOR_JITTER, size=(3, n, m)), 0.0, 1.0)

    planes = np.concatenate([elevation[None], variance[None], color], axis=0)
    return FeatureStack(planes), gt_cost


def goal_bonus_field(gt_cost: np.ndarray, seed: int, away_from: tuple = None,
                     bait_prob: float = 0.0) -> np.ndarray:
    """Seeded goal rewards: a strongly negative base plus a large bonus on
    one terrain class.  Usually the bonus sits on the cheapest
    GOAL_QUANTILE of the cost field; with probability ``bait_prob`` it
    lands on the roughest passable cells instead (a distracted-operator
    stop -- feasible, but needlessly expensive).  With ``away_from`` set,
    cells within min(rows, cols) // GOAL_EXCLUDE_DIV Chebyshev distance of
    that cell lose eligibility (when any remain)."""
    rows, cols = gt_cost.shape
    rng = np.random.default_rng(seed)
    field = GOAL_BASE + rng.uniform(0.0, 0.5, size=(rows, cols))
    suboptimal = bait_prob > 0
    bait = suboptimal and rng.random() < bait_prob
    if bait:
        eligible = gt_cost >= np.quantile(gt_cost, 1.0 - BAIT_QUANTILE)
    else:
        eligible = gt_cost <= np.quantile(gt_cost, GOAL_QUANTILE)
    if not eligible.any():
        eligible = gt_cost <= np.quantile(gt_cost, GOAL_QUANTILE)
    if away_from is not None:
        rr, cc = np.indices((rows, cols))
        near = np.maximum(np.abs(rr - away_from[0]), np.abs(cc - away_from[1]))
        lo = min(rows, cols) // GOAL_EXCLUDE_DIV
        if suboptimal:
            # a distracted operator hauls out to rough ground beyond the
            # usual stopping range; attentive stops stay close
            band = (near >= lo + 2) if bait else (near >= lo) & (near <= lo + 2)
        else:
            band = near >= lo
        trimmed = eligible & band
        if trimmed.any():
            eligible = trimmed
        elif suboptimal and (eligible & (near >= lo)).any():
            eligible = eligible & (near >= lo)
    field[eligible] += GOAL_BONUS
    return field


def tempered_policy(mdp: GridMdp, v: np.ndarray, r_goal: np.ndarray, beta: float) -> np.ndarray:
    """Soften the greedy policy over successor values with temperature
    ``beta``: 0 is argmax (ties to the lowest action code), large values
    approach uniform over available actions."""
    scores = np.full((mdp.n_cells, mdp.n_actions), -np.inf)
    for a in mdp.move_actions:
        ok = mdp.move_ok[:, a]
        scores[ok, a] = mdp.gamma * v[mdp.move_succ[ok, a]]
    scores[:, Action.END] = mdp.gamma * r_goal.reshape(-1)
    if beta == 0.0:
        policy = np.zeros_like(scores)
        policy[np.arange(mdp.n_cells), np.argmax(scores, axis=1)] = 1.0
        return policy
    z = scores / beta
    z -= z.max(axis=1, keepdims=True)
    policy = np.exp(z)
    policy[~mdp.move_ok] = 0.0
    return policy / policy.sum(axis=1, keepdims=True)


def gen_demo(spec: WorldSpec, gt_cost: np.ndarray, start: tuple, seed: int) -> Trajectory:
    """Sample one demonstration on the true cost field.

    The demonstrator solves the soft MDP on reward = -gt_cost with a seeded
    goal-bonus field, then follows the tempered policy from ``start`` until
    it stops or the horizon cap 4*(rows+cols) forces a stop.
    """
    n, m = gt_cost.shape
    if not (0 <= start[0] < n and 0 <= start[1] < m):
        raise GridError(f"start {start} outside {n}x{m} grid")
    mdp = GridMdp(GridSpec(rows=n, cols=m, gamma=DEMO_GAMMA))
    # the greedy (beta 0) demonstrator is the optimal expert; only tempered
    # operators get distracted onto bait stops
    bait = BAIT_PROB if spec.beta > 0 else 0.0
    r_goal = goal_bonus_field(gt_cost, seed, away_from=start, bait_prob=bait)
    solution = soft_value_iteration(mdp, RewardMaps(-gt_cost, r_goal))
    policy = tempered_policy(mdp, solution.v, r_goal, spec.beta)

    rng = np.random.default_rng(seed + 1)
    cap = 4 * (n + m)
    steps = []
    row, col = start
    for t in range(cap):
        cell = row * m + col
        if t == cap - 1:
            action = Action.END
        elif spec.beta == 0.0:
            action = Action(int(np.argmax(policy[cell])))
        else:
            action = Action(int(rng.choice(mdp.n_actions, p=policy[cell])))
        steps.append((State.path(row, col), action))
        if action is Action.END:
            break
        nxt = mdp.move_succ[cell, action]
        row, col = int(nxt) // m, int(nxt) % m
    return Trajectory(steps=steps, terminal=State.goal(steps[-1][0].row, steps[-1][0].col))


def gen_imu(features: FeatureStack, traj: Trajectory, length: int, seed: int) -> ImuWindow:
    """Seeded Gaussian window whose spread follows the traversed terrain:
    per-channel std = 0.05 + 0.5 * mean variance of the visited cells, with
    gravity on the third accelerometer axis."""
    rng = np.random.default_rng(seed)
    visited = traj.cells()
    mean_var = float(np.mean([features.variance[r, c] for r, c in visited]))
    std = IMU_STD_BASE + IMU_VAR_GAIN * mean_var
    samples = rng.normal(0.0, std, size=(length, 6))
    samples[:, 2] += GRAVITY
    return ImuWindow(samples)


def gen_energy(gt_cost: np.ndarray, traj: Trajectory, noise_std: float, seed: int):
    """Joint log whose per-step energy is ENERGY_SCALE * gt_cost of the
    crossed cell plus Gaussian noise, clipped at zero.  Returns the log and
    the AEC computed from it."""
    rng = np.random.default_rng(seed)
    n = len(traj)
    targets = np.array([ENERGY_SCALE * gt_cost[r, c] for r, c in traj.cells()])
    if noise_std > 0:
        targets = targets + rng.normal(0.0, noise_std, size=n)
    targets = np.maximum(targets, 0.0)

    dq = np.tile(_JOINT_SIGNS * _DQ_PATTERN, (n, 1))
    scale = targets / float(_DQ_PATTERN @ _DQ_PATTERN)
    torques = scale[:, None] * (_JOINT_SIGNS * _DQ_PATTERN)[None, :]
    log = JointLog(torques=torques, displacements=dq)
    return log, aec(trajectory_energy(log), n)


def gen_dataset(spec: WorldSpec, count: int, split_ratio: float = 0.7):
    """Deterministic list of SynthSamples with a train/test split.

    Every sample draws a fresh world seed from the spec's master seed; the
    first floor(count * split_ratio) samples form the train split.
    """
    if count < 2:
        raise ConfigError(f"need at least 2 samples, got {count}")
    if not (0.0 < split_ratio < 1.0):
        raise ConfigError(f"split ratio must be in (0,1), got {split_ratio}")
    master = np.random.default_rng(spec.seed)
    n_train = int(count * split_ratio + 1e-9)
    start = (spec.rows // 2, spec.cols // 2)
    samples = []
    for k in range(count):
        world_seed, demo_seed, imu_seed, energy_seed = (
            int(s) for s in master.integers(0, 2**62, size=4)
        )
        wspec = dataclasses.replace(spec, seed=world_seed)
        features, gt_cost = gen_world(wspec)
        traj = gen_demo(wspec, gt_cost, start, demo_seed)
        imu = gen_imu(features, traj, spec.imu_len, imu_seed)
        _log, traj.aec = gen_energy(gt_cost, traj, spec.energy_noise, energy_seed)
        samples.append(
            SynthSample(
                sample_id=k,
                features=features,
                imu=imu,
                trajectory=traj,
                gt_cost=gt_cost,
                split="train" if k < n_train else "test",
            )
        )
    return samples
