from .generate import (GENERATORS, GenerationOutput, GenerationTask, evaluate_objective, generate_as,
                       generate_at, generate_cs, generate_lc, generate_random, run_generation)
from .gp import GaussianProcess, se_kernel, stable_cholesky
from .objective import constraint_violation, risk_objective, risk_value
from .optimizers import SearchResult, bayes_opt, grid_search, pso, pso_step, random_search, reinforce_search

__all__ = ["GENERATORS", "GenerationOutput", "GenerationTask", "evaluate_objective", "generate_as",
           "generate_at", "generate_cs", "generate_lc", "generate_random", "run_generation",
           "GaussianProcess", "se_kernel", "stable_cholesky", "constraint_violation", "risk_objective",
           "risk_value", "SearchResult", "bayes_opt", "grid_search", "pso", "pso_step", "random_search",
           "reinforce_search"]
