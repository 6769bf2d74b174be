"""Proximal safeguarded augmented Lagrangian method for constrained
difference-of-convex programs.

The outer loop linearizes the concave part of the objective at the current
iterate, minimizes the resulting adaptive augmented Lagrangian plus a
proximal term, updates multiplier estimates, and escalates the proximal and
penalty parameters whenever feasibility and complementarity fail to improve
by a fixed ratio.  Bounded auxiliary safeguard sequences replace the raw
multipliers inside the penalty terms; their norms never increase.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .problem import Array, DcProgram, PrimalDualPoint, complementarity_residual
from .subproblem import (InnerResult, InnerSolverFailure, ProxSubproblem,
                         SolveStatus, smooth_composite_inner)


@dataclass
class SolverParams:
    """Tunables of the outer loop.

    ``q`` scales the proximal metric (``Q = q * I``).  ``tol_step`` and
    ``tol_feas`` are the numeric termination tolerances on the scaled step
    and on feasibility/complementarity.  The counter limits control when the
    small-step threshold ``eps`` shrinks: after ``small_step_limit`` small
    steps of which ``step_scale_limit`` set the proximal weight from the step
    length.
    """

    inner_solver: Callable[[ProxSubproblem], InnerResult] = smooth_composite_inner
    sigma0: float = 0.1
    eps0: float = 0.1
    q: float = 1.0
    alpha: float = 0.5
    beta: float = 0.9
    gamma: float = 0.9
    theta: float = 0.8
    growth: float = 10.0
    small_step_limit: int = 20
    step_scale_limit: int = 5
    tol_step: float = 1e-3
    tol_feas: float = 1e-3
    max_outer: int = 500
    time_limit: float | None = None
    inner_tol: float | None = None
    inner_max_iter: int = 20000

    def __post_init__(self):
        if self.sigma0 <= 0 or self.eps0 <= 0 or self.q <= 0:
            raise ValueError("sigma0, eps0 and q must be positive")
        for name in ("alpha", "beta", "gamma", "theta"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.growth <= 1:
            raise ValueError("growth must exceed 1")
        if not 0 < self.step_scale_limit < self.small_step_limit:
            raise ValueError("need 0 < step_scale_limit < small_step_limit")
        if self.tol_step <= 0 or self.tol_feas <= 0:
            raise ValueError("termination tolerances must be positive")

    @property
    def rho0(self) -> float:
        return self.sigma0 ** self.gamma

    def effective_inner_tol(self) -> float:
        if self.inner_tol is not None:
            return self.inner_tol
        return min(self.tol_step, self.tol_feas) / 10.0


@dataclass
class SolverState:
    """Evolving state of one outer run."""

    x: Array
    sigma: float
    rho: float
    eps: float
    u: Array
    v: Array
    s: Array | None = None
    small_step_count: int = 0
    step_scale_count: int = 0
    eq_ref: float = 0.0
    comp_ref: float = 0.0
    k: int = 0


@dataclass
class IterationReport:
    k: int
    objective: float
    eq_norm: float
    comp_norm: float
    step_norm: float
    sigma: float
    rho: float
    eps: float
    escalated: bool | None
    inner_iterations: int
    inner_residual: float
    elapsed: float


@dataclass
class TraceEntry:
    """Per-iteration snapshot for invariant checking."""

    k: int
    x_prev: Array
    x_next: Array
    h_subgrad: Array
    sigma: float
    rho: float
    eps: float
    u_prev: Array
    v_prev: Array
    u_next: Array
    v_next: Array
    lam: Array
    mu: Array
    sigma_next: float
    rho_next: float
    eps_next: float
    small_step_count: int
    step_scale_count: int
    escalated: bool | None


@dataclass
class SolveResult:
    point: PrimalDualPoint
    status: SolveStatus
    reports: list[IterationReport]
    trace: list[TraceEntry] = field(default_factory=list)
    wall_time: float = 0.0
    cpu_time: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.reports)


def solve_subproblem(prog: DcProgram, state: SolverState,
                     params: SolverParams) -> InnerResult:
    """Minimize the current adaptive model over the abstract set.

    Raises `InnerSolverFailure` when the configured inner solver exhausts its
    iteration cap.
    """
    if state.s is None:
        _, s = prog.eval_h(state.x)
        state.s = s
    sub = ProxSubproblem(
        prog=prog, anchor=state.x, h_subgrad=state.s, u=state.u, v=state.v,
        rho=state.rho, prox_weight=state.sigma * params.q,
        tol=params.effective_inner_tol(), max_iter=params.inner_max_iter)
    return params.inner_solver(sub)


def update_multipliers(state: SolverState, x_next: Array,
                       prog: DcProgram) -> tuple[Array, Array]:
    """Multiplier estimates ``mu = v + rho (Ax-b)``, ``lam = max(0, u + rho c)``."""
    r = prog.eq_residual(x_next)
    c_values, _ = prog.eval_c(x_next)
    mu = state.v + state.rho * r
    lam = np.maximum(0.0, state.u + state.rho * c_values)
    return mu, lam


def check_termination(state: SolverState, x_next: Array, lam_next: Array,
                      prog: DcProgram, tol_step: float, tol_feas: float,
                      q: float = 1.0) -> bool:
    """Numeric stopping test on the scaled step, feasibility and complementarity."""
    step = state.sigma * q * float(np.linalg.norm(x_next - state.x))
    if step > tol_step:
        return False
    if float(np.linalg.norm(prog.eq_residual(x_next))) > tol_feas:
        return False
    c_values, _ = prog.eval_c(x_next)
    return complementarity_residual(c_values, lam_next) <= tol_feas


def progress_test(state: SolverState, x_next: Array, prog: DcProgram,
                  theta: float) -> bool:
    """True when feasibility and complementarity both shrank by factor theta.

    Compares against the reference values stored from the previous iteration
    (at the first iteration: the same measures evaluated at the start point).
    """
    eq_next = float(np.linalg.norm(prog.eq_residual(x_next)))
    if eq_next > theta * state.eq_ref:
        return False
    comp_next = _comp_measure(prog, x_next, state.u, state.rho)
    return comp_next <= theta * state.comp_ref


def _comp_measure(prog: DcProgram, x: Array, u: Array, rho: float) -> float:
    if not prog.n_ineq:
        return 0.0
    c_values, _ = prog.eval_c(x)
    return float(np.linalg.norm(np.minimum(-c_values, u / rho)))


def escalate_parameters(state: SolverState, x_next: Array,
                        params: SolverParams) -> tuple[float, float, float, int, int]:
    """Raise the proximal weight after a stalled iteration.

    Returns ``(sigma, rho, eps, small_step_count, step_scale_count)``.  The
    small-step counter advances whenever ``||dx||^alpha < eps`` (a zero step
    counts); the scale counter only when the new weight was set from the step
    length, which a zero step never triggers.  Both ties go to the step
    length.  ``eps`` shrinks and the counters reset once both limits are met.
    """
    dx = float(np.linalg.norm(np.asarray(x_next, dtype=float) - state.x))
    if dx == 0.0:
        sigma_new = params.growth * state.sigma
        scaled_by_step = False
        small_step = True
    else:
        power = dx ** params.alpha
        eta = params.growth if power >= state.eps else 1.0
        inverse = 1.0 / power
        sigma_new = max(inverse, eta * state.sigma)
        scaled_by_step = inverse >= eta * state.sigma
        small_step = power < state.eps
    rho_new = sigma_new ** params.gamma
    small_count = state.small_step_count + (1 if small_step else 0)
    scale_count = state.step_scale_count + (1 if scaled_by_step else 0)
    if small_count >= params.small_step_limit and scale_count >= params.step_scale_limit:
        return sigma_new, rho_new, params.beta * state.eps, 0, 0
    return sigma_new, rho_new, state.eps, small_count, scale_count


def update_auxiliary_v(v: Array, eq_residual: Array) -> Array:
    """Project the equality safeguard onto orthogonality with the residual.

    Keeps ``v`` when the residual vanishes; otherwise returns the multiple of
    the residual with the same inner product against it, the norm-minimal
    choice.  ``||v_next|| <= ||v||`` always.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    r = np.atleast_1d(np.asarray(eq_residual, dtype=float))
    rr = float(r @ r)
    if rr == 0.0:
        return v.copy()
    return ((v @ r) / rr) * r


def update_auxiliary_u(u: Array, c_values: Array) -> Array:
    """Shrink the inequality safeguard on the violated components.

    Components with ``c_i <= 0`` are kept; the violated block is replaced by
    the nonnegative multiple of ``c_I`` preserving the inner product
    ``u_I^T c_I``.  The result stays componentwise nonnegative with
    ``||u_next|| <= ||u||``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    c_values = np.atleast_1d(np.asarray(c_values, dtype=float))
    violated = c_values > 0.0
    if not violated.any():
        return u.copy()
    c_violated = c_values[violated]
    coeff = float(u[violated] @ c_violated) / float(c_violated @ c_violated)
    out = u.copy()
    out[violated] = coeff * c_violated
    return out


def solve(prog: DcProgram, params: SolverParams, x0: Array,
          u0: Array | None = None, v0: Array | None = None,
          keep_trace: bool = False) -> SolveResult:
    """Run the outer loop from ``x0`` with safeguard starts ``u0 >= 0``, ``v0``.

    Returns the last primal-dual triple, a status, one report per outer
    iteration and (optionally) a full trace for invariant checking.  On
    `SolveStatus.CONVERGED` the triple satisfies the numeric termination
    test at ``(tol_step, tol_feas)``.
    """
    wall0 = time.perf_counter()
    cpu0 = time.process_time()
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (prog.n,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({prog.n},)")
    u = np.zeros(prog.n_ineq) if u0 is None else np.asarray(u0, dtype=float).copy()
    v = np.zeros(prog.n_eq) if v0 is None else np.asarray(v0, dtype=float).copy()
    if u.shape != (prog.n_ineq,) or v.shape != (prog.n_eq,):
        raise ValueError("safeguard starts have inconsistent shapes")
    if u.size and u.min() < 0:
        raise ValueError("u0 must be componentwise nonnegative")

    state = SolverState(x=x, sigma=params.sigma0, rho=params.rho0,
                        eps=params.eps0, u=u, v=v)
    state.eq_ref = float(np.linalg.norm(prog.eq_residual(x)))
    state.comp_ref = _comp_measure(prog, x, u, state.rho)

    reports: list[IterationReport] = []
    trace: list[TraceEntry] = []
    lam = np.zeros(prog.n_ineq)
    mu = np.zeros(prog.n_eq)
    status = SolveStatus.ITERATION_LIMIT

    for k in range(params.max_outer):
        if params.time_limit is not None and time.perf_counter() - wall0 > params.time_limit:
            status = SolveStatus.TIME_LIMIT
            break
        state.k = k
        iter_start = time.perf_counter()
        _, s = prog.eval_h(state.x)
        state.s = s
        try:
            inner = solve_subproblem(prog, state, params)
        except InnerSolverFailure as failure:
            x_best = failure.x_best
            mu, lam = update_multipliers(state, x_best, prog)
            reports.append(_make_report(prog, state, x_best, k,
                                        None, failure.iterations,
                                        failure.residual, iter_start))
            state.x = x_best
            status = SolveStatus.INNER_SOLVER_FAILURE
            break
        x_next = inner.x
        mu_next, lam_next = update_multipliers(state, x_next, prog)

        if check_termination(state, x_next, lam_next, prog,
                             params.tol_step, params.tol_feas, params.q):
            reports.append(_make_report(prog, state, x_next, k, None,
                                        inner.iterations, inner.residual,
                                        iter_start))
            if keep_trace:
                trace.append(TraceEntry(
                    k=k, x_prev=state.x.copy(), x_next=x_next.copy(),
                    h_subgrad=s.copy(), sigma=state.sigma, rho=state.rho,
                    eps=state.eps, u_prev=state.u.copy(), v_prev=state.v.copy(),
                    u_next=state.u.copy(), v_next=state.v.copy(),
                    lam=lam_next.copy(), mu=mu_next.copy(),
                    sigma_next=state.sigma, rho_next=state.rho,
                    eps_next=state.eps,
                    small_step_count=state.small_step_count,
                    step_scale_count=state.step_scale_count, escalated=None))
            state.x, lam, mu = x_next, lam_next, mu_next
            status = SolveStatus.CONVERGED
            break

        held = progress_test(state, x_next, prog, params.theta)
        if held:
            sigma_next, rho_next, eps_next = state.sigma, state.rho, state.eps
            small_count, scale_count = state.small_step_count, state.step_scale_count
        else:
            sigma_next, rho_next, eps_next, small_count, scale_count = \
                escalate_parameters(state, x_next, params)

        eq_next = float(np.linalg.norm(prog.eq_residual(x_next)))
        comp_next_ref = _comp_measure(prog, x_next, state.u, state.rho)
        v_next = update_auxiliary_v(state.v, prog.eq_residual(x_next))
        c_next, _ = prog.eval_c(x_next)
        u_next = update_auxiliary_u(state.u, c_next)

        reports.append(_make_report(prog, state, x_next, k, not held,
                                    inner.iterations, inner.residual,
                                    iter_start))
        if keep_trace:
            trace.append(TraceEntry(
                k=k, x_prev=state.x.copy(), x_next=x_next.copy(),
                h_subgrad=s.copy(), sigma=state.sigma, rho=state.rho,
                eps=state.eps, u_prev=state.u.copy(), v_prev=state.v.copy(),
                u_next=u_next.copy(), v_next=v_next.copy(),
                lam=lam_next.copy(), mu=mu_next.copy(),
                sigma_next=sigma_next, rho_next=rho_next, eps_next=eps_next,
                small_step_count=small_count, step_scale_count=scale_count,
                escalated=not held))

        state.x, state.u, state.v = x_next, u_next, v_next
        state.sigma, state.rho, state.eps = sigma_next, rho_next, eps_next
        state.small_step_count, state.step_scale_count = small_count, scale_count
        state.eq_ref, state.comp_ref = eq_next, comp_next_ref
        lam, mu = lam_next, mu_next

    point = PrimalDualPoint(x=state.x, lam=lam, mu=mu)
    return SolveResult(point=point, status=status, reports=reports, trace=trace,
                       wall_time=time.perf_counter() - wall0,
                       cpu_time=time.process_time() - cpu0)


def _make_report(prog, state, x_next, k, escalated, inner_iterations,
                 inner_residual, iter_start):
    gval, _ = prog.eval_g(x_next)
    hval, _ = prog.eval_h(x_next)
    c_values, _ = prog.eval_c(x_next)
    lam = np.maximum(0.0, state.u + state.rho * c_values)
    return IterationReport(
        k=k,
        objective=gval - hval,
        eq_norm=float(np.linalg.norm(prog.eq_residual(x_next))),
        comp_norm=complementarity_residual(c_values, lam),
        step_norm=float(np.linalg.norm(x_next - state.x)),
        sigma=state.sigma, rho=state.rho, eps=state.eps,
        escalated=escalated,
        inner_iterations=inner_iterations,
        inner_residual=inner_residual,
        elapsed=time.perf_counter() - iter_start)
