"""Model of a constrained difference-of-convex program and its first-order
diagnostic residuals.

A program minimizes ``g(x) - h(x)`` subject to ``A x = b``, ``c(x) <= 0`` and
``x in C``, where ``g`` and ``h`` are convex and possibly nonsmooth, the
inequality components ``c_i`` are convex, and ``C`` is a closed convex set
given through a projection oracle.  All oracles return a value together with
a single, deterministically chosen subgradient; the residuals computed here
are therefore selection-based rather than set-valued certificates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Array = np.ndarray

# value plus one subgradient
Oracle = Callable[[Array], tuple[float, Array]]

# all component values plus one subgradient per component (rows)
ConstraintOracle = Callable[[Array], tuple[Array, Array]]


@dataclass(frozen=True)
class SetHandle:
    """Abstract constraint set given by a projection and a membership test."""

    project: Callable[[Array], Array]
    contains: Callable[[Array], bool]


WHOLE_SPACE = SetHandle(project=lambda x: x, contains=lambda x: True)


@dataclass(frozen=True)
class DcProgram:
    """A difference-of-convex program with linear equality and convex
    inequality constraints.

    Empty constraint blocks are first-class: ``A``/``b`` may have zero rows
    and ``c`` may be ``None`` with ``n_ineq == 0``.
    """

    n: int
    g: Oracle
    h: Oracle
    A: Array | None = None
    b: Array | None = None
    c: ConstraintOracle | None = None
    n_ineq: int = 0
    set_handle: SetHandle = WHOLE_SPACE

    def __post_init__(self):
        A = np.zeros((0, self.n)) if self.A is None else np.atleast_2d(
            np.asarray(self.A, dtype=float))
        b = np.zeros(A.shape[0]) if self.b is None else np.atleast_1d(
            np.asarray(self.b, dtype=float))
        if A.shape[1] != self.n:
            raise ValueError(f"A has {A.shape[1]} columns, expected n={self.n}")
        if b.shape != (A.shape[0],):
            raise ValueError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
        if self.c is None and self.n_ineq != 0:
            raise ValueError("n_ineq > 0 requires an inequality oracle")
        if self.c is not None and self.n_ineq <= 0:
            raise ValueError("an inequality oracle requires n_ineq > 0")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n_eq(self) -> int:
        return self.A.shape[0]

    def _check_point(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.n},)")
        return x

    def eval_g(self, x: Array) -> tuple[float, Array]:
        value, sub = self.g(self._check_point(x))
        return float(value), np.asarray(sub, dtype=float)

    def eval_h(self, x: Array) -> tuple[float, Array]:
        value, sub = self.h(self._check_point(x))
        return float(value), np.asarray(sub, dtype=float)

    def eval_c(self, x: Array) -> tuple[Array, Array]:
        """Inequality values (m,) and one subgradient per component (m, n)."""
        x = self._check_point(x)
        if self.c is None:
            return np.zeros(0), np.zeros((0, self.n))
        values, subs = self.c(x)
        values = np.atleast_1d(np.asarray(values, dtype=float))
        subs = np.atleast_2d(np.asarray(subs, dtype=float))
        if values.shape != (self.n_ineq,) or subs.shape != (self.n_ineq, self.n):
            raise ValueError("inequality oracle returned inconsistent shapes")
        return values, subs

    def eq_residual(self, x: Array) -> Array:
        return self.A @ self._check_point(x) - self.b


@dataclass(frozen=True)
class PrimalDualPoint:
    """Primal point with multiplier estimates for the two constraint blocks."""

    x: Array
    lam: Array
    mu: Array

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "lam", np.asarray(self.lam, dtype=float))
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))


@dataclass(frozen=True)
class KktResidual:
    """Residual bundle of the first-order conditions at a primal-dual point.

    ``stationarity_norm`` measures the selection-based stationarity
    ``|| t - s + A^T mu + sum_i lam_i w_i + nu ||`` with ``t``, ``s`` and
    ``w_i`` the subgradients returned by the oracles and ``nu`` a supplied
    normal-cone element (zero for the whole space).
    """

    stationarity_norm: float
    equality_norm: float
    complementarity_norm: float
    set_membership: bool


def feasibility_residual(prog: DcProgram, x: Array) -> tuple[float, float]:
    """Return ``||Ax - b||`` and ``||max(0, c(x))||``."""
    eq = float(np.linalg.norm(prog.eq_residual(x)))
    values, _ = prog.eval_c(x)
    ineq = float(np.linalg.norm(np.maximum(values, 0.0)))
    return eq, ineq


def complementarity_residual(c_values: Array, lam: Array) -> float:
    """Return ``||min(-c, lam)||``, zero exactly at complementary pairs."""
    c_values = np.atleast_1d(np.asarray(c_values, dtype=float))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if c_values.shape != lam.shape:
        raise ValueError(
            f"length mismatch: c has shape {c_values.shape}, lam {lam.shape}")
    return float(np.linalg.norm(np.minimum(-c_values, lam)))


def kkt_residual(prog: DcProgram, point: PrimalDualPoint,
                 normal_element: Array | None = None) -> KktResidual:
    """Evaluate the diagnostic residuals of a candidate primal-dual point.

    Deterministic given deterministic oracles.  Requires ``point.lam >= 0``.
    """
    x = prog._check_point(point.x)
    lam = point.lam
    mu = point.mu
    if lam.shape != (prog.n_ineq,):
        raise ValueError(f"lam has shape {lam.shape}, expected ({prog.n_ineq},)")
    if mu.shape != (prog.n_eq,):
        raise ValueError(f"mu has shape {mu.shape}, expected ({prog.n_eq},)")
    if lam.size and lam.min() < 0:
        raise ValueError("multipliers for inequality constraints must be >= 0")
    _, t = prog.eval_g(x)
    _, s = prog.eval_h(x)
    c_values, c_subs = prog.eval_c(x)
    nu = np.zeros(prog.n) if normal_element is None else np.asarray(
        normal_element, dtype=float)
    stationarity = t - s + prog.A.T @ mu + c_subs.T @ lam + nu
    return KktResidual(
        stationarity_norm=float(np.linalg.norm(stationarity)),
        equality_norm=float(np.linalg.norm(prog.eq_residual(x))),
        complementarity_norm=complementarity_residual(c_values, lam),
        set_membership=bool(prog.set_handle.contains(x)),
    )
