from .env import BanditEnv, DrivingEnv
from .observation import SPACES, extract_observation, front_vehicle
from .policy import Policy, PolicyController, act, action_to_control, init_policy
from .registry import agent_name, load_agent, make_controller
from .reward import RewardInfo, compute_reward, reward_terms
from .rule_based import RuleBasedPolicy, rule_based_policy
from .train import DPGConfig, PGConfig, TrainingDivergence, evaluate_policy, train_policy

__all__ = ["BanditEnv", "DrivingEnv", "SPACES", "extract_observation", "front_vehicle", "Policy",
           "PolicyController", "act", "action_to_control", "init_policy", "agent_name", "load_agent",
           "make_controller", "RewardInfo", "compute_reward", "reward_terms", "RuleBasedPolicy",
           "rule_based_policy", "DPGConfig", "PGConfig", "TrainingDivergence", "evaluate_policy",
           "train_policy"]
