"""Regret complexity of representation learning in finite contextual linear bandits."""

from .errors import (InfeasibleAtCap, InvalidInstance, NonUniqueOptimum, NotFullyRealizable,
                     OptimalArmConstraint, OracleTooLarge, ReplearnError, TooFewPolicies,
                     Unrealizable)
from .model import (Allocation, BanditInstance, GapTable, Representation, RepresentationSet,
                    compute_gaps, feature_gap, optimal_policy_allocation, validate_instance)
from .solver import (ComplexitySolution, SolverOptions, Status, check_feasible, solve_clb,
                     solve_fully_realizable, solve_replearn, solve_unstructured)

__version__ = "0.1.0"

__all__ = [
    "Allocation", "BanditInstance", "ComplexitySolution", "GapTable", "InfeasibleAtCap",
    "InvalidInstance", "NonUniqueOptimum", "NotFullyRealizable", "OptimalArmConstraint",
    "OracleTooLarge", "ReplearnError", "Representation", "RepresentationSet", "SolverOptions",
    "Status", "TooFewPolicies", "Unrealizable", "check_feasible", "compute_gaps",
    "feature_gap", "optimal_policy_allocation", "solve_clb", "solve_fully_realizable",
    "solve_replearn", "solve_unstructured", "validate_instance",
]
