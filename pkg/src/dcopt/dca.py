"""Proximal-linearized DCA baseline.

Each outer step linearizes the concave part at the current iterate and
minimizes the resulting convex model plus ``1/2 ||x - x_k||^2`` over the full
feasible set.  The constrained convex subproblems are handled by a classical
safeguarded augmented Lagrangian method whose own subproblems reuse the inner
solvers of the main method.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .problem import Array, DcProgram, complementarity_residual
from .subproblem import (InnerResult, InnerSolverFailure, ProxSubproblem,
                         SolveStatus, smooth_composite_inner)


@dataclass
class DcaParams:
    """Outer tolerance plus the inner safeguarded-ALM configuration.

    The inner method multiplies its penalty by ``alm_growth`` whenever the
    combined infeasibility fails to shrink by ``alm_ratio``, clamps the
    safeguard vectors into a box of radius ``alm_bound``, and stops once
    feasibility, complementarity and subproblem stationarity all drop to
    ``alm_tol``.
    """

    inner_solver: Callable[[ProxSubproblem], InnerResult] = smooth_composite_inner
    tol: float = 1e-3
    max_outer: int = 200
    time_limit: float | None = None
    alm_tol: float = 1e-4
    alm_rho0: float = 1.0
    alm_growth: float = 10.0
    alm_ratio: float = 0.5
    alm_bound: float = 1e6
    alm_max_iter: int = 60
    subsolver_tol: float | None = None
    subsolver_max_iter: int = 20000

    def __post_init__(self):
        if self.tol <= 0 or self.alm_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.alm_growth <= 1:
            raise ValueError("penalty growth factor must exceed 1")
        if not 0 < self.alm_ratio < 1:
            raise ValueError("infeasibility reduction ratio must lie in (0, 1)")

    def effective_subsolver_tol(self) -> float:
        return self.subsolver_tol if self.subsolver_tol is not None else self.alm_tol / 10.0


@dataclass
class ProxModel:
    """Convex model of one outer step: g + linearized concave part + prox."""

    prog: DcProgram
    anchor: Array
    h_subgrad: Array


@dataclass
class AlmResult:
    x: Array
    lam: Array
    mu: Array
    converged: bool
    iterations: int
    stationarity: float
    feasibility: float
    complementarity: float


@dataclass
class DcaIterationReport:
    k: int
    objective: float
    step_norm: float
    alm_iterations: int
    feasibility: float
    complementarity: float
    elapsed: float


@dataclass
class DcaResult:
    x: Array
    lam: Array
    mu: Array
    status: SolveStatus
    reports: list[DcaIterationReport] = field(default_factory=list)
    wall_time: float = 0.0
    cpu_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.reports)


def inner_safeguarded_alm(model: ProxModel, params: DcaParams,
                          start: Array | None = None) -> AlmResult:
    """Solve the constrained convex model by a safeguarded ALM.

    The multiplier updates are ``lam = max(0, u + rho c(x))`` and
    ``mu = v + rho (Ax - b)`` with clamped safeguards; an unconstrained model
    reduces to a single call of the composite subsolver.  Returns
    ``converged=False`` when the iteration cap is met first.
    """
    prog = model.prog
    anchor = np.asarray(model.anchor, dtype=float)
    u_bar = np.zeros(prog.n_ineq)
    v_bar = np.zeros(prog.n_eq)
    rho = params.alm_rho0
    x = anchor.copy() if start is None else np.asarray(start, dtype=float).copy()
    lam = np.zeros(prog.n_ineq)
    mu = np.zeros(prog.n_eq)
    stationarity = np.inf
    eq_norm = comp = np.inf
    prev_infeasibility = np.inf
    for it in range(1, params.alm_max_iter + 1):
        sub = ProxSubproblem(
            prog=prog, anchor=anchor, h_subgrad=model.h_subgrad,
            u=u_bar, v=v_bar, rho=rho, prox_weight=1.0,
            tol=params.effective_subsolver_tol(),
            max_iter=params.subsolver_max_iter, start=x)
        inner = params.inner_solver(sub)
        x = inner.x
        stationarity = inner.residual
        c_values, _ = prog.eval_c(x)
        r = prog.eq_residual(x)
        lam = np.maximum(0.0, u_bar + rho * c_values)
        mu = v_bar + rho * r
        eq_norm = float(np.linalg.norm(r))
        comp = complementarity_residual(c_values, lam)
        infeasibility = max(eq_norm, comp)
        if infeasibility <= params.alm_tol and stationarity <= params.alm_tol:
            return AlmResult(x, lam, mu, True, it, stationarity, eq_norm, comp)
        u_bar = np.clip(lam, 0.0, params.alm_bound)
        v_bar = np.clip(mu, -params.alm_bound, params.alm_bound)
        if infeasibility > params.alm_ratio * prev_infeasibility:
            rho *= params.alm_growth
        prev_infeasibility = infeasibility
    return AlmResult(x, lam, mu, False, params.alm_max_iter,
                     stationarity, eq_norm, comp)


def dca_step(prog: DcProgram, x_k: Array, params: DcaParams) -> Array:
    """One proximal-linearized step from ``x_k``.

    Raises `InnerSolverFailure` with the best point found when the inner ALM
    does not converge.
    """
    x_k = np.asarray(x_k, dtype=float)
    _, s = prog.eval_h(x_k)
    result = inner_safeguarded_alm(ProxModel(prog, x_k, s), params)
    if not result.converged:
        raise InnerSolverFailure(
            "inner safeguarded augmented Lagrangian method stalled",
            result.x, result.stationarity, result.iterations)
    return result.x


def dca_solve(prog: DcProgram, params: DcaParams, x0: Array) -> DcaResult:
    """Iterate proximal-linearized steps until ``||x_next - x|| <= tol``."""
    wall0 = time.perf_counter()
    cpu0 = time.process_time()
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (prog.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({prog.n},)")
    lam = np.zeros(prog.n_ineq)
    mu = np.zeros(prog.n_eq)
    reports: list[DcaIterationReport] = []
    status = SolveStatus.ITERATION_LIMIT
    for k in range(params.max_outer):
        if params.time_limit is not None and time.perf_counter() - wall0 > params.time_limit:
            status = SolveStatus.TIME_LIMIT
            break
        iter_start = time.perf_counter()
        _, s = prog.eval_h(x)
        alm = inner_safeguarded_alm(ProxModel(prog, x, s), params, start=x)
        step_norm = float(np.linalg.norm(alm.x - x))
        gval, _ = prog.eval_g(alm.x)
        hval, _ = prog.eval_h(alm.x)
        reports.append(DcaIterationReport(
            k=k, objective=gval - hval, step_norm=step_norm,
            alm_iterations=alm.iterations, feasibility=alm.feasibility,
            complementarity=alm.complementarity,
            elapsed=time.perf_counter() - iter_start))
        x, lam, mu = alm.x, alm.lam, alm.mu
        if not alm.converged:
            status = SolveStatus.INNER_SOLVER_FAILURE
            break
        if step_norm <= params.tol:
            status = SolveStatus.CONVERGED
            break
    return DcaResult(x=x, lam=lam, mu=mu, status=status, reports=reports,
                     wall_time=time.perf_counter() - wall0,
                     cpu_time=time.process_time() - cpu0)
