"""Value computations on the belief game: certified grids, tree cross-check,
shifted and prefix-guarantee values, windowed uniform-value estimation."""

from .engine import (
    StageRule,
    UniformValueReport,
    ValueGrid,
    WValueResult,
    default_resolution,
    evaluate_measure,
    uniform_value_estimate,
    value_mn,
    value_theta_grid,
    w_mn,
)
from .exact import value_theta_exact
from .grid import SimplexGrid, concave_majorant, lower_value, lipschitz_upper
from .mdp import MarkovRule, markov_strategy_of_play, play_of_markov_strategy
from .stage import StageSolution, one_shot_lp, stage_solve
from .thetas import ThetaWeights, suffix_chain, theta_lift, theta_plus, theta_shift

__all__ = [
    "StageRule",
    "StageSolution",
    "SimplexGrid",
    "ThetaWeights",
    "UniformValueReport",
    "ValueGrid",
    "WValueResult",
    "MarkovRule",
    "concave_majorant",
    "default_resolution",
    "evaluate_measure",
    "lipschitz_upper",
    "lower_value",
    "markov_strategy_of_play",
    "one_shot_lp",
    "play_of_markov_strategy",
    "stage_solve",
    "suffix_chain",
    "theta_lift",
    "theta_plus",
    "theta_shift",
    "uniform_value_estimate",
    "value_mn",
    "value_theta_exact",
    "value_theta_grid",
    "w_mn",
]
