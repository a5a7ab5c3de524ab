"""Regularized optimal transport over tempered exponential measures."""
from .errors import (ConvergenceError, DegenerateBaselineError, DomainError,
                     InfeasibleSupportError)
from .tempered_math import (Temperature, exp_t, log_t, ominus_t, otimes_t, phi_t,
                            tempered_divergence)
from .measures import (CoSimplexVector, CouplingPlan, DensityVector, Problem, from_density,
                       independence_table, sample_problem, to_density, validate_coupling)
from .objectives import (CostMatrix, EffectiveCostMatrix, ball_membership, effective_cost,
                         expected_cost, measured_cost, regularized_objective)
from .seeds import SeedMatrix, build_seed, expected_seed, measured_seed
from .solvers import (DualConfig, DualSolution, SolveConfig, SolveReport, approximation_gap,
                      column_projection, exact_dual_expected, exact_dual_measured, row_projection,
                      sinkhorn, tempered_ot)
from .lp_oracle import LpSolution, exact_measured_distance, relative_cost, solve_ot_exact
from .analysis import (FeasibilityVerdict, SupportPattern, brualdi_feasible,
                       check_sparsity_theorem, contraction_ratio, indecomposable,
                       projective_diameter, support)

__version__ = "0.1.0"
