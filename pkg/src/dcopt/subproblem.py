"""Augmented Lagrangian values and the per-iteration convex model shared by
the outer solvers.

Both outer methods repeatedly minimize the same kind of convex model: the
first convex component plus a linearization of the concave part at an anchor,
augmented penalties for the two constraint blocks, and a proximal term.  Only
the safeguard vectors, the penalty parameter and the proximal weight differ
between the two methods.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .problem import Array, DcProgram, WHOLE_SPACE
from .subsolvers import CompositeProblem, fista


class SolveStatus(str, Enum):
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration_limit"
    TIME_LIMIT = "time_limit"
    INNER_SOLVER_FAILURE = "inner_solver_failure"


class InnerSolverFailure(RuntimeError):
    """An inner solve hit its iteration cap; carries the best point found."""

    def __init__(self, message: str, x_best: Array,
                 residual: float = np.nan, iterations: int = 0):
        super().__init__(message)
        self.x_best = np.asarray(x_best, dtype=float)
        self.residual = residual
        self.iterations = iterations


@dataclass
class InnerResult:
    x: Array
    residual: float
    iterations: int


def auglag_value(prog: DcProgram, x: Array, lam: Array, mu: Array, rho: float,
                 anchor: Array | None = None, anchor_subgrad: Array | None = None,
                 linearize_h: bool = True) -> float:
    """Augmented Lagrangian of the program at ``(x, lam, mu)``.

    With ``linearize_h`` the concave part ``-h`` is replaced by its affine
    majorant at ``anchor`` using the supplied subgradient, which is the
    adaptive form minimized in the subproblems; otherwise ``-h(x)`` itself is
    used.  In either case the value is

        g-part + mu^T (Ax-b) + rho/2 ||Ax-b||^2
               + (||max(0, lam + rho c(x))||^2 - ||lam||^2) / (2 rho).
    """
    if rho <= 0:
        raise ValueError("penalty parameter must be positive")
    x = np.asarray(x, dtype=float)
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    gval, _ = prog.eval_g(x)
    if linearize_h:
        if anchor is None or anchor_subgrad is None:
            raise ValueError("linearized value needs an anchor and a subgradient")
        hval, _ = prog.eval_h(anchor)
        concave = -hval - anchor_subgrad @ (x - anchor)
    else:
        hval, _ = prog.eval_h(x)
        concave = -hval
    r = prog.eq_residual(x)
    total = gval + concave + mu @ r + 0.5 * rho * (r @ r)
    if prog.n_ineq:
        c_values, _ = prog.eval_c(x)
        shifted = np.maximum(0.0, lam + rho * c_values)
        total += (shifted @ shifted - lam @ lam) / (2.0 * rho)
    return float(total)


@dataclass
class ProxSubproblem:
    """One convex model: linearized concave part, penalties, proximal term.

    The model objective is ``g(x) - h(anchor) - s^T (x - anchor)`` plus the
    augmented penalties at ``(u, v, rho)`` plus
    ``prox_weight/2 * ||x - anchor||^2``.  ``start`` is the warm-start point
    handed to the inner solver (defaults to the anchor).
    """

    prog: DcProgram
    anchor: Array
    h_subgrad: Array
    u: Array
    v: Array
    rho: float
    prox_weight: float
    tol: float
    max_iter: int = 20000
    start: Array | None = None

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float)
        self.h_subgrad = np.asarray(self.h_subgrad, dtype=float)
        self.u = np.atleast_1d(np.asarray(self.u, dtype=float))
        self.v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if self.rho <= 0:
            raise ValueError("penalty parameter must be positive")
        if self.start is None:
            self.start = self.anchor.copy()
        self._h_anchor = self.prog.eval_h(self.anchor)[0]

    def value(self, x: Array) -> float:
        """Full model objective, constants included."""
        base = auglag_value(self.prog, x, self.u, self.v, self.rho,
                            anchor=self.anchor, anchor_subgrad=self.h_subgrad)
        dx = np.asarray(x, dtype=float) - self.anchor
        return base + 0.5 * self.prox_weight * float(dx @ dx)

    def penalty_smooth(self, x: Array) -> tuple[float, Array]:
        """Value and gradient of every model term except ``g(x)``.

        Smooth whenever the inequality components are continuously
        differentiable (the returned component subgradients are then
        gradients), which holds for all shipped problem families.
        """
        prog = self.prog
        x = np.asarray(x, dtype=float)
        dx = x - self.anchor
        r = prog.eq_residual(x)
        val = (-self._h_anchor - self.h_subgrad @ dx + self.v @ r
               + 0.5 * self.rho * (r @ r) + 0.5 * self.prox_weight * (dx @ dx))
        grad = -self.h_subgrad + prog.A.T @ (self.v + self.rho * r) \
            + self.prox_weight * dx
        if prog.n_ineq:
            c_values, c_subs = prog.eval_c(x)
            active = np.maximum(0.0, self.u + self.rho * c_values)
            val += (active @ active - self.u @ self.u) / (2.0 * self.rho)
            grad = grad + c_subs.T @ active
        return float(val), grad


def _run_fista(sub: ProxSubproblem, problem: CompositeProblem) -> InnerResult:
    result = fista(problem, sub.start, sub.tol, sub.max_iter)
    if not result.converged:
        raise InnerSolverFailure(
            f"composite solver exhausted {sub.max_iter} iterations "
            f"(residual {result.residual:.3e} > {sub.tol:.3e})",
            result.x, result.residual, result.iterations)
    return InnerResult(result.x, result.residual, result.iterations)


def l1_composite_inner(sub: ProxSubproblem) -> InnerResult:
    """Inner solver for programs whose first convex component is ``||x||_1``."""
    problem = CompositeProblem(smooth=sub.penalty_smooth, l1_weight=1.0)
    return _run_fista(sub, problem)


def smooth_composite_inner(sub: ProxSubproblem) -> InnerResult:
    """Generic inner solver treating the g-subgradient as a gradient.

    Valid when ``g`` and all inequality components are continuously
    differentiable.  Projects onto the abstract set when one is present.
    """
    prog = sub.prog

    def smooth(x):
        gval, ggrad = prog.eval_g(x)
        pval, pgrad = sub.penalty_smooth(x)
        return gval + pval, ggrad + pgrad

    project = None if prog.set_handle is WHOLE_SPACE else prog.set_handle.project
    problem = CompositeProblem(smooth=smooth, l1_weight=0.0, project=project)
    return _run_fista(sub, problem)
