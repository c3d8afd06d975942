"""Online covering with convex objectives and scheduling with startup costs:
fractional algorithms, online rounding, adversaries and exact oracles."""
from .errors import *  # noqa: F401,F403
from .fractional import FractionalState, fractional_report, potential, psi, run_fractional
from .harness import ExperimentConfig, InstanceSpec, generate_instance, run_experiment
from .model import Instance, ScaledInstance, lp_objective, preprocess, validate_feasibility
from .ocg import ConvexObjective, OcgState, init_state, linear_objective
from .ompc import OmpcProblem, make_lp_violation_objective, run_lower_bound_adversary
from .oracles import brute_force_opt, greedy_lp_norm, monte_carlo
from .rounding import RoundingState, assign_job_integer, default_alpha, open_blue_step, z_values
from .rounding_l1 import assign_job_l1, half_prefix, l1_report

__version__ = "0.1.0"
