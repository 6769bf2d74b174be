"""Multisource Weber location planning.

Place ``p`` facilities in a box so that the weighted sum of distances from
each demand point to its nearest facility is minimal.  The objective
``sum_j w_j min_i ||x_i - a_j||`` splits into a difference of convex parts:
the sum over all facility-demand distances minus, per demand point, the
largest sum of distances to all facilities but one.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dca import DcaParams
from .problem import Array, DcProgram
from .psalmdc import SolverParams
from .subproblem import InnerResult, ProxSubproblem
from .subsolvers import AnchorProblem, minimize_anchor_problem

_BOX_DEFAULTS = dict(sigma0=0.1, eps0=0.1, q=1e-3, alpha=0.9,
                     tol_step=1e-3, tol_feas=1e-3)


@dataclass(frozen=True)
class WeberInstance:
    """Demand points with weights, a facility count and a square region."""

    points: Array        # (N, 2)
    weights: Array       # (N,)
    facilities: int
    lower: float = 0.0
    upper: float = 10.0

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ValueError("demand points must be an (N, 2) array")
        if weights.shape != (points.shape[0],):
            raise ValueError("one weight per demand point required")
        if np.any(weights <= 0):
            raise ValueError("weights must be positive")
        if self.facilities < 1:
            raise ValueError("at least one facility required")
        if not self.lower < self.upper:
            raise ValueError("degenerate box")
        diffs = points[:, None, :] - points[None, :, :]
        dist = np.linalg.norm(diffs, axis=2)
        np.fill_diagonal(dist, np.inf)
        if dist.min() <= 0:
            raise ValueError("demand points must be pairwise distinct")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return 2 * self.facilities


def weber_objective(instance: WeberInstance, x: Array) -> float:
    """``sum_j w_j min_i ||x_i - a_j||`` for the stacked facility vector."""
    sites = np.asarray(x, dtype=float).reshape(instance.facilities, 2)
    d = np.linalg.norm(sites[:, None, :] - instance.points[None, :, :], axis=2)
    return float(instance.weights @ d.min(axis=0))


def _distances_and_units(instance, x):
    sites = np.asarray(x, dtype=float).reshape(instance.facilities, 2)
    diffs = sites[:, None, :] - instance.points[None, :, :]   # (p, N, 2)
    d = np.linalg.norm(diffs, axis=2)                         # (p, N)
    units = np.zeros_like(diffs)
    np.divide(diffs, d[:, :, None], out=units, where=d[:, :, None] > 0)
    return d, units


def weber_g(instance: WeberInstance, x: Array) -> tuple[float, Array]:
    """Sum of all weighted facility-demand distances with one subgradient.

    At a kink (facility on a demand point) the zero vector is selected for
    that distance term.
    """
    d, units = _distances_and_units(instance, x)
    value = float((instance.weights * d).sum())
    grad = (instance.weights[None, :, None] * units).sum(axis=1)
    return value, grad.ravel()


def weber_h(instance: WeberInstance, x: Array) -> tuple[float, Array]:
    """Concave-part oracle: per demand point, the largest sum of distances to
    all facilities but one.

    The maximizing left-out index is the nearest facility; ties break to the
    lowest index.  With a single facility the value is identically zero.
    """
    d, units = _distances_and_units(instance, x)
    nearest = np.argmin(d, axis=0)                            # (N,)
    cols = np.arange(instance.n_points)
    value = float(instance.weights @ (d.sum(axis=0) - d[nearest, cols]))
    mask = np.ones_like(d)
    mask[nearest, cols] = 0.0
    grad = ((instance.weights * mask)[:, :, None] * units).sum(axis=1)
    return value, grad.ravel()


def _box_oracle(instance):
    p = instance.facilities
    lo, hi = instance.lower, instance.upper
    subs = np.zeros((4 * p, 2 * p))
    for i in range(p):
        subs[4 * i + 0, 2 * i + 0] = -1.0
        subs[4 * i + 1, 2 * i + 0] = 1.0
        subs[4 * i + 2, 2 * i + 1] = -1.0
        subs[4 * i + 3, 2 * i + 1] = 1.0

    def oracle(x):
        sites = x.reshape(p, 2)
        values = np.empty(4 * p)
        values[0::4] = lo - sites[:, 0]
        values[1::4] = sites[:, 0] - hi
        values[2::4] = lo - sites[:, 1]
        values[3::4] = sites[:, 1] - hi
        return values, subs

    return oracle


def build_weber_program(instance: WeberInstance) -> DcProgram:
    """Program over the stacked facility vector.

    The box becomes four affine inequalities per facility in the order
    (lower_1, upper_1, lower_2, upper_2), facilities consecutive; there is no
    equality block and the abstract set is the whole space.
    """
    return DcProgram(
        n=instance.dim,
        g=lambda x: weber_g(instance, x),
        h=lambda x: weber_h(instance, x),
        c=_box_oracle(instance),
        n_ineq=4 * instance.facilities,
    )


def make_weber_inner(instance: WeberInstance):
    """Inner solver exploiting separability across facilities.

    Each facility's part of the model is an anchor problem over the demand
    points whose smooth remainder collects the linearization shift, the box
    penalty and the proximal term.
    """
    lo, hi = instance.lower, instance.upper

    def inner(sub: ProxSubproblem) -> InnerResult:
        p = instance.facilities
        anchors = sub.anchor.reshape(p, 2)
        shifts = sub.h_subgrad.reshape(p, 2)
        u = sub.u.reshape(p, 4)
        rho, weight = sub.rho, sub.prox_weight
        out = np.empty((p, 2))
        residual = 0.0
        iterations = 0
        for i in range(p):
            psi = _facility_remainder(anchors[i], shifts[i], u[i], rho,
                                      weight, lo, hi)
            ap = AnchorProblem(instance.points, instance.weights, psi)
            out[i], res_i, it_i = minimize_anchor_problem(ap, sub.tol, sub.max_iter)
            residual = max(residual, res_i)
            iterations += it_i
        return InnerResult(out.ravel(), residual, iterations)

    return inner


def _facility_remainder(anchor, shift, u, rho, weight, lo, hi):
    def psi(y):
        dy = y - anchor
        c = np.array([lo - y[0], y[0] - hi, lo - y[1], y[1] - hi])
        active = np.maximum(0.0, u + rho * c)
        value = (-shift @ dy + (active @ active) / (2.0 * rho)
                 + 0.5 * weight * (dy @ dy))
        grad = -shift + weight * dy + np.array(
            [active[1] - active[0], active[3] - active[2]])
        return value, grad

    return psi


def weber_solver_params(instance: WeberInstance, **overrides) -> SolverParams:
    """Outer-solver defaults for this problem family."""
    settings = dict(_BOX_DEFAULTS,
                    inner_solver=make_weber_inner(instance), **overrides)
    return SolverParams(**settings)


def weber_safeguard_start(instance: WeberInstance) -> Array:
    """Initial inequality safeguard: four per facility, all entries 4."""
    return 4.0 * np.ones(4 * instance.facilities)


def weber_dca_params(instance: WeberInstance, **overrides) -> DcaParams:
    settings = dict(inner_solver=make_weber_inner(instance), tol=1e-3,
                    alm_tol=min(_BOX_DEFAULTS["tol_step"],
                                _BOX_DEFAULTS["tol_feas"]) / 10.0, **overrides)
    return DcaParams(**settings)


def random_start(instance: WeberInstance, rng: np.random.Generator) -> Array:
    """Uniform start in the open box, one pair of coordinates per facility."""
    return rng.uniform(instance.lower, instance.upper, size=instance.dim)


def synthetic_weber_instance(seed: int = 0, n_points: int = 50,
                             facilities: int = 1, lower: float = 0.0,
                             upper: float = 10.0) -> WeberInstance:
    """Seeded stand-in data: uniform demand points with unit weights."""
    rng = np.random.default_rng(seed)
    for _ in range(10):
        points = rng.uniform(lower, upper, size=(n_points, 2))
        try:
            return WeberInstance(points=points, weights=np.ones(n_points),
                                 facilities=facilities, lower=lower, upper=upper)
        except ValueError:
            continue
    raise RuntimeError("could not draw pairwise distinct demand points")


def load_weber_csv(path, facilities: int, lower: float = 0.0,
                   upper: float = 10.0) -> WeberInstance:
    """Load demand data from a CSV with header ``x,y,w``."""
    xs, ys, ws = [], [], []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or not {"x", "y", "w"} <= set(reader.fieldnames):
            raise ValueError("expected CSV header with columns x, y, w")
        for row in reader:
            xs.append(float(row["x"]))
            ys.append(float(row["y"]))
            ws.append(float(row["w"]))
    points = np.column_stack([xs, ys])
    return WeberInstance(points=points, weights=np.array(ws),
                         facilities=facilities, lower=lower, upper=upper)


_ZERO_PSI = lambda x: (0.0, np.zeros(2))  # noqa: E731


def _single_facility_optimum(points, weights, tol=1e-9):
    ap = AnchorProblem(points, weights, _ZERO_PSI)
    x, _, _ = minimize_anchor_problem(ap, tol, max_iter=20000)
    return x


def weber_reference_objective(instance: WeberInstance, seed: int = 0,
                              grid: int = 200, starts: int = 32) -> float:
    """Reference optimal value computed independently of the outer solvers.

    A single facility poses a convex problem: dense grid search over the box
    cross-checked against the exact anchor-scheme solve.  For several
    facilities the best of many seeded location-allocation descents is
    reported; with multiple local optima this is a reference for success
    counting, not a certificate.
    """
    if instance.facilities == 1:
        exact = _single_facility_optimum(instance.points, instance.weights)
        best_val = weber_objective(instance, exact)
        axis = np.linspace(instance.lower, instance.upper, grid)
        gx, gy = np.meshgrid(axis, axis)
        cand = np.column_stack([gx.ravel(), gy.ravel()])
        d = np.linalg.norm(cand[:, None, :] - instance.points[None, :, :], axis=2)
        grid_best = cand[int(np.argmin(d @ instance.weights))]
        return min(best_val, weber_objective(instance, grid_best))

    rng = np.random.default_rng(seed)
    p = instance.facilities
    best_val = np.inf
    for _ in range(starts):
        sites = rng.uniform(instance.lower, instance.upper, size=(p, 2))
        assignment = None
        for _ in range(60):
            d = np.linalg.norm(sites[:, None, :] - instance.points[None, :, :],
                               axis=2)
            new_assignment = np.argmin(d, axis=0)
            if assignment is not None and np.array_equal(new_assignment, assignment):
                break
            assignment = new_assignment
            for i in range(p):
                members = assignment == i
                if members.any():
                    sites[i] = _single_facility_optimum(
                        instance.points[members], instance.weights[members])
        best_val = min(best_val, weber_objective(instance, sites.ravel()))
    return float(best_val)
