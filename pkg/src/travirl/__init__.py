"""travirl: terrain traversability cost maps learned from demonstrations.

A grid MDP with decoupled crossing/stopping states, maximum-entropy soft
value iteration, differentiable reward models with exact hand-written
gradients, an energy-ranked trajectory loss for extrapolating beyond
suboptimal demonstrations, a synthetic world generator with ground-truth
costs, and evaluation metrics.  See README.md for a tour.
"""

from .errors import (
    ConfigError,
    DataFormatError,
    GridError,
    ModelStateError,
    NumericError,
    ShapeError,
    TravirlError,
)
from .grid import (
    Action,
    GridMdp,
    GridSpec,
    State,
    Trajectory,
    Violation,
    build_mdp,
    trajectory_return,
    validate_trajectory,
)
from .models import (
    FeatureStack,
    FusionNet,
    ImuWindow,
    LinearReward,
    ParamVector,
    RewardMaps,
    make_model,
    param_init,
)
from .ranking import JointLog, RankPair, aec, path_return, rank_pairs, ranking_loss, trajectory_energy, visit_map
from .solver import SoftSolution, SvfPair, demo_svf, medirl_grad, policy_propagation, soft_value_iteration
from .synth import SynthSample, WorldSpec, gen_dataset, gen_demo, gen_energy, gen_imu, gen_world
from .training import TrainConfig, TrainReport, medirl_step, sgd_update, tmedirl_step, train
from .metrics import EvalReport, evaluate, hausdorff, nll, plan_path, rank_accuracy, spearman, uniform_policy

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ConfigError",
    "DataFormatError",
    "EvalReport",
    "FeatureStack",
    "FusionNet",
    "GridError",
    "GridMdp",
    "GridSpec",
    "ImuWindow",
    "JointLog",
    "LinearReward",
    "ModelStateError",
    "NumericError",
    "ParamVector",
    "RankPair",
    "RewardMaps",
    "ShapeError",
    "SoftSolution",
    "State",
    "SvfPair",
    "SynthSample",
    "TrainConfig",
    "TrainReport",
    "Trajectory",
    "TravirlError",
    "Violation",
    "WorldSpec",
    "aec",
    "build_mdp",
    "demo_svf",
    "evaluate",
    "gen_dataset",
    "gen_demo",
    "gen_energy",
    "gen_imu",
    "gen_world",
    "hausdorff",
    "make_model",
    "medirl_grad",
    "medirl_step",
    "nll",
    "param_init",
    "path_return",
    "plan_path",
    "policy_propagation",
    "rank_accuracy",
    "rank_pairs",
    "ranking_loss",
    "sgd_update",
    "soft_value_iteration",
    "spearman",
    "tmedirl_step",
    "train",
    "trajectory_energy",
    "trajectory_return",
    "uniform_policy",
    "validate_trajectory",
    "visit_map",
]
