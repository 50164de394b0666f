"""Self-adaptive NSGA-II for discrete neural-architecture design spaces.

Gradient-boosted-tree importance picks the loci that variation operators
touch, and a small policy network picks per-individual mutation and
crossover probabilities. Synthetic benchmarks with planted parameters and a
cost lookup table make every run reproducible offline.
"""

from .benchmarks import ProblemSpec, SyntheticProblem, make_problem, true_front
from .engine import RunConfig, RunResult, compare, load_result, paired_configs, run
from .space import DesignParameter, SearchSpace

__version__ = "0.1.0"

__all__ = [
    "DesignParameter",
    "ProblemSpec",
    "RunConfig",
    "RunResult",
    "SearchSpace",
    "SyntheticProblem",
    "compare",
    "load_result",
    "make_problem",
    "paired_configs",
    "run",
    "true_front",
]
