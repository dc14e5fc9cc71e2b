"""Maximum-entropy solver over the grid MDP.

Soft value iteration replaces the max of classic value iteration with a
log-sum-exp, so the induced stochastic policy weights every action by the
exponentiated discounted value of its successor.  Goal-state values are
pinned to the current goal rewards each sweep rather than to zero, which
keeps the learned path rewards usable as a goal-independent cost map.

With the discount at 1 and values fully converged, exp(V(s)) equals the sum
of exp(return) over all trajectories out of s, and the stationary policy
reproduces the trajectory distribution exactly; at discounts below 1 the
stationary policy is the usual approximation.  Visitation frequencies are
computed two ways: counted along a demonstration, and propagated forward
through the policy from a start distribution.  Their difference is the
gradient of the demonstration log-likelihood with respect to the reward
fields.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import GridError, NumericError, ShapeError
from .grid import Action, GridMdp, Trajectory, validate_trajectory
from .models import RewardMaps

MASS_EPS = 1e-9


@dataclass
class SoftSolution:
    """Converged (or sweep-capped) soft values and the induced policy.

    ``v`` holds one value per path cell (flat, row-major); ``policy`` and
    ``log_policy`` are (n_cells, n_actions) with zero probability at
    unavailable actions.  ``sweeps`` counts update sweeps actually run and
    ``residual`` is the final max value change.
    """

    v: np.ndarray
    policy: np.ndarray
    log_policy: np.ndarray
    sweeps: int
    residual: float


@dataclass
class SvfPair:
    """Demonstrated vs expected state-visitation frequencies, per cell."""

    demo_path: np.ndarray
    demo_goal: np.ndarray
    expected_path: np.ndarray
    expected_goal: np.ndarray


def default_sweeps(mdp: GridMdp) -> int:
    """Enough sweeps for value information to cross the grid twice."""
    return 2 * (mdp.rows + mdp.cols)


def _scores(mdp: GridMdp, v: np.ndarray, goal_v: np.ndarray, gamma: float) -> np.ndarray:
    """Per (cell, action) score gamma * V(successor); -inf where unavailable."""
    s = np.full((mdp.n_cells, mdp.n_actions), -np.inf)
    for a in mdp.move_actions:
        ok = mdp.move_ok[:, a]
        s[ok, a] = gamma * v[mdp.move_succ[ok, a]]
    s[:, Action.END] = gamma * goal_v
    return s


def soft_value_iteration(
    mdp: GridMdp, rewards: RewardMaps, sweeps: int = None, tol: float = 1e-6
) -> SoftSolution:
    """Iterate V(s) = r_p(s) + logsumexp_a(gamma * V(T(s, a))) over path
    states, with goal values held at the goal rewards.

    Stops after ``sweeps`` sweeps (default twice the grid perimeter) or when
    the max value change drops below ``tol``; pass ``tol=0`` to force the
    exact sweep count.  The returned policy is the softmax of successor
    values under the final V.
    """
    if sweeps is None:
        sweeps = default_sweeps(mdp)
    if sweeps < 1:
        raise GridError(f"need at least one sweep, got {sweeps}")
    if rewards.path.shape != (mdp.rows, mdp.cols):
        raise ShapeError(
            f"reward maps {rewards.path.shape} do not match grid {(mdp.rows, mdp.cols)}"
        )
    gamma = mdp.gamma
    r_path = rewards.path.reshape(-1)
    r_goal = rewards.goal.reshape(-1)

    v = r_path + gamma * r_goal
    used = 0
    residual = np.inf
    for _ in range(sweeps):
        scores = _scores(mdp, v, r_goal, gamma)
        v_new = r_path + logsumexp(scores, axis=1)
        used += 1
        residual = float(np.max(np.abs(v_new - v)))
        v = v_new
        if not np.isfinite(v).all():
            bad = int(np.argmax(~np.isfinite(v)))
            raise NumericError(
                f"soft value iteration produced a non-finite value at cell "
                f"({bad // mdp.cols},{bad % mdp.cols})"
            )
        if residual < tol:
            break

    scores = _scores(mdp, v, r_goal, gamma)
    norm = logsumexp(scores, axis=1)
    log_policy = scores - norm[:, None]
    policy = np.exp(log_policy)
    policy[~mdp.move_ok] = 0.0
    return SoftSolution(v=v, policy=policy, log_policy=log_policy, sweeps=used, residual=residual)


def demo_svf(mdp: GridMdp, traj: Trajectory, discounting: bool = True):
    """Per-cell visitation weights of one demonstration.

    With discounting, a visit at step t counts gamma^t and the terminal
    goal counts gamma^len; multiple visits accumulate.
    """
    violation = validate_trajectory(mdp, traj)
    if violation is not None:
        raise GridError(f"invalid trajectory at step {violation.index}: {violation.reason}")
    gamma = mdp.gamma if discounting else 1.0
    demo_path = np.zeros(mdp.n_cells)
    demo_goal = np.zeros(mdp.n_cells)
    for t, (s, _a) in enumerate(traj.steps):
        demo_path[mdp.cell_index(s.row, s.col)] += gamma**t
    term = traj.terminal
    demo_goal[mdp.cell_index(term.row, term.col)] += gamma ** len(traj.steps)
    return demo_path, demo_goal


def policy_propagation(
    mdp: GridMdp,
    policy: np.ndarray,
    start: np.ndarray,
    horizon: int,
    discounting: bool = True,
    mass_tol: float = MASS_EPS,
    mass_trace: list = None,
):
    """Diffuse start-state probability mass through the policy.

    Returns (expected_path, expected_goal): expected_path(s) sums the
    discounted probability of crossing s at each step, expected_goal(s) the
    discounted probability of stopping there.  Stops early once the
    remaining path mass falls below ``mass_tol``.  When ``mass_trace`` is a
    list, (step, path_mass, absorbed_goal_mass) tuples are appended for
    conservation checks.
    """
    start = np.asarray(start, dtype=np.float64).reshape(-1)
    if start.size != mdp.n_cells:
        raise ShapeError(f"start distribution has {start.size} cells, grid has {mdp.n_cells}")
    if abs(start.sum() - 1.0) > 1e-9 or (start < 0).any():
        raise GridError("start must be a probability distribution over path states")
    if horizon < 1:
        raise GridError(f"horizon must be >= 1, got {horizon}")
    if policy.shape != (mdp.n_cells, mdp.n_actions):
        raise ShapeError(f"policy shape {policy.shape} does not match the MDP")

    gamma = mdp.gamma if discounting else 1.0
    mass = start.copy()
    expected_path = np.zeros(mdp.n_cells)
    expected_goal = np.zeros(mdp.n_cells)
    for t in range(horizon):
        if mass_trace is not None:
            mass_trace.append((t, float(mass.sum()), float(expected_goal.sum())))
        expected_path += gamma**t * mass
        expected_goal += gamma ** (t + 1) * mass * policy[:, Action.END]
        nxt = np.zeros(mdp.n_cells)
        for a in mdp.move_actions:
            ok = mdp.move_ok[:, a]
            np.add.at(nxt, mdp.move_succ[ok, a], mass[ok] * policy[ok, a])
        mass = nxt
        if mass.sum() < mass_tol:
            break
    return expected_path, expected_goal


def medirl_grad(svf: SvfPair):
    """Gradient of the demonstration log-likelihood in reward space:
    demonstrated minus expected visitation, per cell, for both maps.
    This is an ascent direction."""
    if svf.demo_path.shape != svf.expected_path.shape or svf.demo_goal.shape != svf.expected_goal.shape:
        raise ShapeError("svf fields do not share dimensions")
    return svf.demo_path - svf.expected_path, svf.demo_goal - svf.expected_goal
