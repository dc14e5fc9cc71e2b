"""Tour of the grid MDP and maximum-entropy soft values.

Builds a toy 4x4 terrain grid, defines path/goal rewards by hand, runs soft
value iteration, and shows how the induced stochastic policy trades off
stepping cost against stopping bonus.
"""

import numpy as np

from travirl import Action, GridSpec, RewardMaps, State, build_mdp, trajectory_return
from travirl.grid import Trajectory
from travirl.solver import soft_value_iteration

spec = GridSpec(rows=4, cols=4, gamma=0.9)
mdp = build_mdp(spec)
print(f"{spec.rows}x{spec.cols} grid -> {spec.n_states} states "
      f"({spec.n_cells} path + {spec.n_cells} goal)")

s = State.path(0, 0)
print(f"actions at corner {s.cell}: {[a.name for a in mdp.available_actions(s)]}")
print(f"RIGHT from (0,0) -> {mdp.transition(s, Action.RIGHT).cell}")

# crossing the top row is cheap, everything else costs more; stopping is
# only attractive at the far corner
path_reward = np.full((4, 4), -2.0)
path_reward[0, :] = -0.5
goal_reward = np.full((4, 4), -5.0)
goal_reward[0, 3] = 4.0

solution = soft_value_iteration(mdp, RewardMaps(path_reward, goal_reward))
print(f"\nsoft values after {solution.sweeps} sweeps (residual {solution.residual:.2e}):")
print(np.array_str(solution.v.reshape(4, 4), precision=2, suppress_small=True))

print("\nstop probability per cell:")
print(np.array_str(solution.policy[:, Action.END].reshape(4, 4), precision=3))

arrows = {Action.UP: "^", Action.DOWN: "v", Action.LEFT: "<", Action.RIGHT: ">", Action.END: "*"}
likely = np.argmax(solution.policy, axis=1).reshape(4, 4)
print("\nmost likely action per cell:")
for r in range(4):
    print(" ".join(arrows[Action(int(a))] for a in likely[r]))

# the discounted return of walking the top row and stopping at the bonus
steps = [
    (State.path(0, 0), Action.RIGHT),
    (State.path(0, 1), Action.RIGHT),
    (State.path(0, 2), Action.RIGHT),
    (State.path(0, 3), Action.END),
]
traj = Trajectory(steps=steps, terminal=State.goal(0, 3))
value = trajectory_return(traj, path_reward, goal_reward, spec.gamma)
by_hand = sum(0.9**t * -0.5 for t in range(4)) + 0.9**4 * 4.0
print(f"\nreturn of the top-row walk: {value:.4f} (by hand: {by_hand:.4f})")
