"""Multitask functional-UCB bandits and linear MDPs over general function classes."""
from .backend import backend_name
from .bandit import (
    DigitBanditEnv,
    EpisodeRecord,
    MultitaskBanditEnv,
    run_eps_greedy,
    run_gfucb,
    step_env,
)
from .confidence import (
    BetaConfig,
    ConfidenceSet,
    SearchConfig,
    beta_practical,
    beta_theoretical,
    optimistic_select,
    width,
)
from .eluder import ScalarClass, eluder_dimension, eluder_linear_estimate, is_eps_dependent
from .erm import TrainConfig, loss, solve_finite, solve_mdp_level, solve_twolayer
from .function_space import (
    FunctionClass,
    LinearRep,
    MultiheadFunction,
    SampleLog,
    TableRep,
    TwoLayerRep,
    empirical_norm_sq,
    evaluate,
    evaluate_batch,
    gradient,
    log_covering_linear,
)
from .mdp import (
    LinearMdpEnv,
    beta_level,
    env_function_class,
    inherent_bellman_error,
    make_zero_ibe_env,
    run_mdp_ucb,
)

__version__ = "0.1.0"
