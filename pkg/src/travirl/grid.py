"""Grid MDP over a 2D terrain map.

Every map cell appears twice in the state space: once as a *path* state the
agent crosses, and once as a co-located *goal* state where it may stop.
Moves are deterministic; the ``END`` action transfers the agent from a path
state to the goal state of the same cell, which is terminal.  An n x m map
therefore has 2*n*m states.

The return of a trajectory collects the path reward of every visited cell,
discounted by step index, plus the goal reward of the terminal cell one step
after the final ``END``:  r_p(s_0) + g*r_p(s_1) + ... + g^L * r_g(terminal).
Traversability cost is the negative path reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import GridError, ShapeError

PATH = "path"
GOAL = "goal"


class Action(IntEnum):
    """Agent actions. Codes 0..4 are the default set; 5..8 are the optional
    diagonal extension (enabled per GridSpec, off by default)."""

    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    END = 4
    UP_LEFT = 5
    UP_RIGHT = 6
    DOWN_LEFT = 7
    DOWN_RIGHT = 8


# Row/col offset of each move action. UP decreases the row index: the map
# origin is the top-left corner and cells are indexed row-major.
MOVE_DELTAS = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
    Action.UP_LEFT: (-1, -1),
    Action.UP_RIGHT: (-1, 1),
    Action.DOWN_LEFT: (1, -1),
    Action.DOWN_RIGHT: (1, 1),
}

DEFAULT_ACTIONS = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT, Action.END)
DIAGONAL_ACTIONS = DEFAULT_ACTIONS + (
    Action.UP_LEFT,
    Action.UP_RIGHT,
    Action.DOWN_LEFT,
    Action.DOWN_RIGHT,
)


@dataclass(frozen=True)
class State:
    """A path or goal state at a grid cell."""

    kind: str
    row: int
    col: int

    @classmethod
    def path(cls, row: int, col: int) -> "State":
        return cls(PATH, row, col)

    @classmethod
    def goal(cls, row: int, col: int) -> "State":
        return cls(GOAL, row, col)

    @property
    def is_path(self) -> bool:
        return self.kind == PATH

    @property
    def is_goal(self) -> bool:
        return self.kind == GOAL

    @property
    def cell(self) -> tuple[int, int]:
        return (self.row, self.col)


@dataclass(frozen=True)
class GridSpec:
    """Geometry and discount of the terrain grid.

    ``resolution_m`` is carried as metadata only; all math runs in cell
    units.  ``gamma`` must lie in [0, 1); gamma == 1 is permitted only when
    ``allow_gamma_one`` is set (used by exact small-scale oracles, where the
    soft values have a closed enumeration form).
    """

    rows: int
    cols: int
    resolution_m: float = 0.1
    gamma: float = 0.95
    diagonals: bool = False
    allow_gamma_one: bool = False

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise GridError(f"grid must have positive dims, got {self.rows}x{self.cols}")
        if not (0.0 <= self.gamma < 1.0):
            if self.gamma == 1.0 and self.allow_gamma_one:
                pass
            else:
                raise GridError(f"gamma must be in [0,1), got {self.gamma}")
        if self.resolution_m <= 0:
            raise GridError(f"resolution must be positive, got {self.resolution_m}")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    @property
    def n_states(self) -> int:
        return 2 * self.rows * self.cols


@dataclass
class Trajectory:
    """A demonstrated or sampled walk.

    ``steps`` holds (path state, action) pairs in order; the final action is
    ``END`` and ``terminal`` is the goal state co-located with the last path
    cell.  ``aec`` is an optional average-energy-consumption label.
    """

    steps: list = field(default_factory=list)
    terminal: State = None
    aec: float = None

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def start(self) -> State:
        return self.steps[0][0]

    def cells(self) -> list[tuple[int, int]]:
        return [(s.row, s.col) for s, _ in self.steps]


@dataclass(frozen=True)
class Violation:
    """First structural problem found in a trajectory."""

    index: int
    reason: str


class GridMdp:
    """Deterministic MDP over the grid; immutable after construction.

    Besides the State-level interface the instance exposes flat per-cell
    tables used by the solver: ``move_ok[c, a]`` flags whether move action
    ``a`` is available at cell ``c`` and ``move_succ[c, a]`` holds the target
    cell index (-1 where unavailable).  ``END`` is available everywhere and
    leads to the goal state of the same cell.
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.rows, self.cols = spec.rows, spec.cols
        self.gamma = spec.gamma
        self.actions = DIAGONAL_ACTIONS if spec.diagonals else DEFAULT_ACTIONS
        self.n_actions = len(self.actions)
        self.n_cells = spec.n_cells
        self.move_actions = tuple(a for a in self.actions if a is not Action.END)

        n, m = self.rows, self.cols
        self.move_ok = np.zeros((self.n_cells, self.n_actions), dtype=bool)
        self.move_succ = np.full((self.n_cells, self.n_actions), -1, dtype=np.int64)
        rr, cc = np.divmod(np.arange(self.n_cells), m)
        for a in self.move_actions:
            dr, dc = MOVE_DELTAS[a]
            nr, nc = rr + dr, cc + dc
            ok = (nr >= 0) & (nr < n) & (nc >= 0) & (nc < m)
            self.move_ok[:, a] = ok
            self.move_succ[ok, a] = nr[ok] * m + nc[ok]
        self.move_ok[:, Action.END] = True
        self.move_succ[:, Action.END] = np.arange(self.n_cells)

    def cell_index(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise GridError(f"cell ({row},{col}) outside {self.rows}x{self.cols} grid")
        return row * self.cols + col

    def available_actions(self, s: State) -> tuple:
        """Actions usable at ``s``: in-grid moves plus END for path states,
        nothing for goal states (they are terminal)."""
        if s.is_goal:
            return ()
        c = self.cell_index(s.row, s.col)
        return tuple(a for a in self.actions if self.move_ok[c, a])

    def transition(self, s: State, a: Action) -> State:
        """Deterministic successor of action ``a`` at path state ``s``."""
        if s.is_goal:
            raise GridError(f"goal state {s} has no transitions")
        c = self.cell_index(s.row, s.col)
        if a not in self.actions or not self.move_ok[c, a]:
            raise GridError(f"action {a!r} not available at {s}")
        if a is Action.END:
            return State.goal(s.row, s.col)
        t = self.move_succ[c, a]
        return State.path(int(t) // self.cols, int(t) % self.cols)

    def goal_of(self, s: State) -> State:
        return State.goal(s.row, s.col)


def build_mdp(spec: GridSpec) -> GridMdp:
    return GridMdp(spec)


def _check_fields(mdp_or_shape, path_reward, goal_reward):
    if hasattr(mdp_or_shape, "rows"):
        shape = (mdp_or_shape.rows, mdp_or_shape.cols)
    else:
        shape = mdp_or_shape
    path_reward = np.asarray(path_reward, dtype=np.float64)
    goal_reward = np.asarray(goal_reward, dtype=np.float64)
    if path_reward.shape != shape or goal_reward.shape != shape:
        raise ShapeError(
            f"reward fields {path_reward.shape}/{goal_reward.shape} do not match grid {shape}"
        )
    return path_reward, goal_reward


def trajectory_return(traj: Trajectory, path_reward, goal_reward, gamma: float) -> float:
    """Discounted return: sum_t gamma^t * r_p(s_t) + gamma^len * r_g(terminal)."""
    rows = len(path_reward)
    cols = len(path_reward[0]) if rows else 0
    path_reward, goal_reward = _check_fields((rows, cols), path_reward, goal_reward)
    total = 0.0
    for t, (s, _a) in enumerate(traj.steps):
        total += gamma**t * path_reward[s.row, s.col]
    total += gamma ** len(traj.steps) * goal_reward[traj.terminal.row, traj.terminal.col]
    return float(total)


def validate_trajectory(mdp: GridMdp, traj: Trajectory):
    """Check transition consistency and terminal structure.

    Returns None when the trajectory is well-formed, otherwise a Violation
    naming the first offending step index.  Never raises.
    """
    if traj is None or len(traj.steps) == 0:
        return Violation(0, "trajectory is empty")
    last = len(traj.steps) - 1
    for i, (s, a) in enumerate(traj.steps):
        if not s.is_path:
            return Violation(i, f"step state {s} is not a path state")
        if not (0 <= s.row < mdp.rows and 0 <= s.col < mdp.cols):
            return Violation(i, f"state {s} outside the grid")
        if a not in mdp.actions:
            return Violation(i, f"action {a!r} not in the action set")
        c = mdp.cell_index(s.row, s.col)
        if not mdp.move_ok[c, a]:
            return Violation(i, f"action {a!r} not available at {s}")
        if i < last:
            if a is Action.END:
                return Violation(i, "END before the final step")
            nxt = traj.steps[i + 1][0]
            succ = mdp.move_succ[c, a]
            if not nxt.is_path or mdp.cell_index(nxt.row, nxt.col) != succ:
                return Violation(i + 1, f"step {i + 1} does not follow the transition from {s}")
    s_last, a_last = traj.steps[last]
    if a_last is not Action.END:
        return Violation(last, "missing terminal END")
    term = traj.terminal
    if term is None or not term.is_goal or term.cell != s_last.cell:
        return Violation(last, f"terminal {term} is not the goal of the last cell {s_last.cell}")
    return None
