"""Structure-based simulation of probabilistic Boolean networks."""

from .engine import (PreparedSimulation, Simulator, Trajectory, exact_transition_matrix, prepare,
                     simulate, step_grouped, step_reduced, step_reference)
from .generate import generate_random
from .grouping import GroupingPlan, ResourceLimitError, combine, greedy_partition, lower_bound, partition
from .model import (BooleanFunction, Model, ModelError, Node, density, eval_function, load_model,
                    parse_model, save_model, serialize_model)
from .reduction import ReducedModel, check_leaf_perturbation, find_leaves, reduce
from .sampling import AliasTable, PerturbationPlan, alias_next, build_alias, build_perturbation_plan

__version__ = "0.1.0"
