"""Inner convex solvers.

Two workhorses: an accelerated proximal gradient method with backtracking for
l1-composite objectives, and an anchor-aware descent scheme for objectives of
the form ``sum_j w_j ||x - a_j|| + psi(x)`` whose only nondifferentiable
points are the anchors ``a_j`` themselves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .problem import Array, Oracle


def soft_threshold(x: Array, tau: float) -> Array:
    """Componentwise ``sign(x) * max(|x| - tau, 0)``, the prox of ``tau*||.||_1``."""
    if tau < 0:
        raise ValueError("threshold must be nonnegative")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


@dataclass
class CompositeProblem:
    """``l1_weight * ||x||_1 + smooth(x)`` with backtracked curvature.

    ``smooth`` returns value and gradient in one call.  An optional projection
    replaces the prox step; it is only admissible when ``l1_weight == 0``.
    """

    smooth: Oracle
    l1_weight: float = 0.0
    project: Callable[[Array], Array] | None = None

    def __post_init__(self):
        if self.l1_weight < 0:
            raise ValueError("l1 weight must be nonnegative")
        if self.project is not None and self.l1_weight != 0:
            raise ValueError("projection step requires a zero l1 weight")

    def value(self, x: Array) -> float:
        v, _ = self.smooth(x)
        return float(v) + self.l1_weight * float(np.abs(x).sum())


@dataclass
class FistaResult:
    x: Array
    residual: float
    iterations: int
    converged: bool
    value: float


def fista(problem: CompositeProblem, x0: Array, tol: float,
          max_iter: int = 20000, l0: float = 1.0, growth: float = 2.0) -> FistaResult:
    """Accelerated proximal gradient descent with backtracking line search.

    Stops when a subgradient certificate of the composite objective has norm
    at most ``tol``: with ``x+ = prox(y - grad(y)/L)`` the vector
    ``L (y - x+) - grad(y) + grad(x+)`` lies in the subdifferential at ``x+``.
    On hitting ``max_iter`` the best iterate by objective value is returned
    with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    w = problem.l1_weight
    x = np.asarray(x0, dtype=float).copy()
    y = x.copy()
    L = float(l0)
    t = 1.0
    f_y, grad_y = problem.smooth(y)
    if not np.isfinite(f_y):
        raise ArithmeticError("non-finite objective value at the start point")
    best_x = x.copy()
    best_val = float(f_y) + w * float(np.abs(x).sum())
    residual = np.inf
    for it in range(1, max_iter + 1):
        while True:
            if problem.project is not None:
                x_new = problem.project(y - grad_y / L)
            else:
                x_new = soft_threshold(y - grad_y / L, w / L)
            step = x_new - y
            f_new, grad_new = problem.smooth(x_new)
            if not np.isfinite(f_new):
                raise ArithmeticError("non-finite objective value in line search")
            bound = f_y + grad_y @ step + 0.5 * L * (step @ step)
            if f_new <= bound + 1e-12 * max(1.0, abs(f_y)):
                break
            if L > 1e18:
                raise ArithmeticError("curvature estimate overflow in backtracking")
            L *= growth
        residual = float(np.linalg.norm(L * (y - x_new) - grad_y + grad_new))
        val_new = float(f_new) + w * float(np.abs(x_new).sum())
        if val_new < best_val:
            best_val, best_x = val_new, x_new.copy()
        if residual <= tol:
            return FistaResult(x_new, residual, it, True, val_new)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_next) * (x_new - x)
        x, t = x_new, t_next
        f_y, grad_y = problem.smooth(y)
    return FistaResult(best_x, residual, max_iter, False, best_val)


@dataclass
class AnchorProblem:
    """Weighted sum of distances to fixed anchors plus a smooth remainder.

    The full objective ``phi(x) = sum_j weights[j] * ||x - anchors[j]|| +
    psi(x)`` is differentiable everywhere except at the anchors, which must be
    pairwise distinct.
    """

    anchors: Array          # (N, d)
    weights: Array          # (N,)
    psi: Oracle

    def __post_init__(self):
        self.anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if self.weights.shape != (self.anchors.shape[0],):
            raise ValueError("one weight per anchor required")
        if np.any(self.weights <= 0):
            raise ValueError("anchor weights must be positive")
        diffs = self.anchors[:, None, :] - self.anchors[None, :, :]
        dist = np.linalg.norm(diffs, axis=2)
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= 0:
            raise ValueError("anchors must be pairwise distinct")


def anchor_objective(ap: AnchorProblem, x: Array) -> float:
    x = np.asarray(x, dtype=float)
    d = np.linalg.norm(ap.anchors - x, axis=1)
    v, _ = ap.psi(x)
    return float(ap.weights @ d + v)


def anchor_gradient(ap: AnchorProblem, x: Array) -> Array:
    """Gradient of the full objective; only valid away from the anchors."""
    x = np.asarray(x, dtype=float)
    diff = x - ap.anchors
    d = np.linalg.norm(diff, axis=1)
    if d.min() <= 0:
        raise ArithmeticError("gradient requested at an anchor point")
    _, psi_grad = ap.psi(x)
    return (ap.weights / d) @ diff + psi_grad


def _remainder_gradient(ap: AnchorProblem, j: int) -> Array:
    """Gradient at anchor j of the objective minus its own distance term."""
    a = ap.anchors[j]
    diff = a - ap.anchors
    d = np.linalg.norm(diff, axis=1)
    d[j] = np.inf
    _, psi_grad = ap.psi(a)
    return (ap.weights / d) @ diff + psi_grad


def anchor_minimizer_test(ap: AnchorProblem, j: int) -> bool:
    """Exact optimality test at anchor j.

    The anchor minimizes the objective iff the gradient of the smooth
    remainder there has norm at most the anchor's own weight.
    """
    return float(np.linalg.norm(_remainder_gradient(ap, j))) <= float(ap.weights[j])


def anchor_descent_step(ap: AnchorProblem, j: int,
                        max_halvings: int = 60) -> tuple[Array, float, Array]:
    """Escape step from a non-optimal anchor.

    Moves along the negative remainder gradient, halving the step from 1
    until the objective strictly decreases and the trial point coincides with
    no anchor.  The directional derivative there is
    ``w_j ||grad|| - ||grad||^2 < 0``, so a decrease must exist.
    """
    a = ap.anchors[j]
    d = -_remainder_gradient(ap, j)
    base = anchor_objective(ap, a)
    t = 1.0
    for _ in range(max_halvings):
        trial = a + t * d
        clear = np.linalg.norm(ap.anchors - trial, axis=1).min() > 0.0
        if clear and anchor_objective(ap, trial) < base:
            return d, t, trial
        t *= 0.5
    raise ArithmeticError("no decrease found along the anchor escape direction")


def smooth_descent(oracle: Oracle, x0: Array, tol: float, max_iter: int = 5000,
                   forbidden: Callable[[Array], bool] | None = None) -> Array:
    """Monotone gradient descent with Barzilai-Borwein steps and backtracking.

    Terminates when the gradient norm drops to ``tol`` or after ``max_iter``
    steps.  Trial points rejected by ``forbidden`` (e.g. nondifferentiable
    anchors) shrink the step by half.
    """
    x, _, _ = _smooth_descent_loop(oracle, x0, tol, max_iter, forbidden)
    return x


def _smooth_descent_loop(oracle, x0, tol, max_iter, forbidden=None):
    x = np.asarray(x0, dtype=float).copy()
    val, grad = oracle(x)
    if not np.isfinite(val):
        raise ArithmeticError("non-finite objective value at the start point")
    prev_x = prev_grad = None
    step = 1.0
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return x, gnorm, it - 1
        if prev_x is not None:
            sx = x - prev_x
            sg = grad - prev_grad
            curv = sx @ sg
            if curv > 0:
                step = float(np.clip((sx @ sx) / curv, 1e-12, 1e12))
        t = step
        accepted = False
        for _ in range(80):
            trial = x + t * (-grad)
            if forbidden is not None and forbidden(trial):
                t *= 0.5
                continue
            tval, tgrad = oracle(trial)
            if not np.isfinite(tval):
                raise ArithmeticError("non-finite objective value in line search")
            if tval <= val - 1e-4 * t * gnorm * gnorm:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            raise ArithmeticError("descent line search failed")
        prev_x, prev_grad = x, grad
        x, val, grad = trial, tval, tgrad
    return x, float(np.linalg.norm(grad)), max_iter


def solve_weber_subproblem(ap: AnchorProblem, tol: float, max_iter: int = 5000) -> Array:
    """Minimize an anchor problem.

    Evaluates the objective at every anchor, applies the exact optimality
    test at the best one, and otherwise escapes it with a guaranteed-descent
    step followed by smooth descent inside the differentiable region.
    """
    x, _, _ = minimize_anchor_problem(ap, tol, max_iter)
    return x


def minimize_anchor_problem(ap: AnchorProblem, tol: float,
                            max_iter: int = 5000) -> tuple[Array, float, int]:
    """As `solve_weber_subproblem` but also reporting residual and iterations."""
    values = [anchor_objective(ap, a) for a in ap.anchors]
    j = int(np.argmin(values))
    if anchor_minimizer_test(ap, j):
        return ap.anchors[j].copy(), 0.0, 0
    _, _, trial = anchor_descent_step(ap, j)

    def oracle(x):
        return anchor_objective(ap, x), anchor_gradient(ap, x)

    def at_anchor(x):
        return float(np.linalg.norm(ap.anchors - x, axis=1).min()) <= 1e-12

    return _smooth_descent_loop(oracle, trial, tol, max_iter, forbidden=at_anchor)
