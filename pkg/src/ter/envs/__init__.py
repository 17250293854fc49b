from ter.envs.base import Env, EnvStep, EpisodeOverError, TabularModel
from ter.envs.grid import GridEnv, generate_layout, reachable
from ter.envs.nchain import NChainEnv
from ter.envs.oracle import OptimalQ, optimal_q, solve_model
from ter.envs.registry import EnvSpecError, make_env, parse_env_spec
from ter.envs.toy import GraphMDP, six_state_mdp
from ter.envs.wrappers import StochasticWrapper

__all__ = [
    "Env", "EnvStep", "EpisodeOverError", "TabularModel", "GridEnv", "generate_layout",
    "reachable", "NChainEnv", "OptimalQ", "optimal_q", "solve_model", "EnvSpecError",
    "make_env", "parse_env_spec", "GraphMDP", "six_state_mdp", "StochasticWrapper",
]
