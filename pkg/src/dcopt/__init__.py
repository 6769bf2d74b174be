"""Solvers and benchmarks for constrained difference-of-convex programs."""

from .dca import (AlmResult, DcaParams, DcaResult, ProxModel, dca_solve,
                  dca_step, inner_safeguarded_alm)
from .problem import (DcProgram, KktResidual, PrimalDualPoint, SetHandle,
                      WHOLE_SPACE, complementarity_residual,
                      feasibility_residual, kkt_residual)
from .psalmdc import (IterationReport, SolveResult, SolverParams, SolverState,
                      TraceEntry, check_termination, escalate_parameters,
                      progress_test, solve, solve_subproblem,
                      update_auxiliary_u, update_auxiliary_v,
                      update_multipliers)
from .subproblem import (InnerResult, InnerSolverFailure, ProxSubproblem,
                         SolveStatus, auglag_value, l1_composite_inner,
                         smooth_composite_inner)
from .subsolvers import (AnchorProblem, CompositeProblem, FistaResult,
                         anchor_descent_step, anchor_minimizer_test,
                         anchor_objective, fista, minimize_anchor_problem,
                         smooth_descent, soft_threshold,
                         solve_weber_subproblem)

__all__ = [name for name in dir() if not name.startswith("_")]
