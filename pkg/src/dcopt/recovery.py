"""Sparse signal recovery benchmarks.

Recover an s-sparse signal from underdetermined linear measurements by
minimizing a difference-of-convex sparsity surrogate subject to ``Ax = b``:
either ``||x||_1 - ||x||_2`` or ``||x||_1`` minus the sum of the k largest
magnitudes.  Includes the sensing-matrix and signal generators used for the
benchmark matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dca import DcaParams
from .problem import Array, DcProgram
from .psalmdc import SolverParams
from .subproblem import l1_composite_inner

L1_MINUS_L2 = "l1_minus_l2"
L1_MINUS_TOPK = "l1_minus_topk"
VARIANTS = (L1_MINUS_L2, L1_MINUS_TOPK)


def gen_gaussian_matrix(m: int, n: int, seed: int) -> Array:
    """Columns drawn from a normal distribution with covariance ``I/m``."""
    if m > n:
        raise ValueError("expected an underdetermined system (m <= n)")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n))


def _cosine_columns(m: int, n: int, refinement: float, seed: int) -> Array:
    rng = np.random.default_rng(seed)
    xi = rng.random(m)
    indices = np.arange(1, n + 1)
    return np.cos(2.0 * np.pi * np.outer(xi, indices) / refinement) / np.sqrt(m)


def gen_dct_matrix(m: int, n: int, seed: int) -> Array:
    """Random partial cosine matrix: column i is ``cos(2 pi i xi)/sqrt(m)``."""
    if m > n:
        raise ValueError("expected an underdetermined system (m <= n)")
    return _cosine_columns(m, n, 1.0, seed)


def gen_oversampled_dct(m: int, n: int, refinement: int, seed: int) -> Array:
    """Oversampled cosine matrix ``cos(2 pi i xi / F)/sqrt(m)``.

    Larger refinement factors yield higher column coherence and harder
    recovery; ``F=1`` reproduces the plain cosine matrix for the same seed.
    """
    if m > n:
        raise ValueError("expected an underdetermined system (m <= n)")
    if refinement < 1:
        raise ValueError("refinement factor must be at least 1")
    return _cosine_columns(m, n, float(refinement), seed)


def gen_sparse_signal(n: int, s: int, min_sep: int = 1, seed: int = 0) -> Array:
    """s-sparse signal with standard normal entries on a random support.

    Support indices keep pairwise distance at least ``min_sep``; supports are
    drawn uniformly among all admissible ones via the standard gap bijection.
    """
    if s < 1 or s > n:
        raise ValueError("sparsity must lie in [1, n]")
    if min_sep < 1:
        raise ValueError("minimum separation must be at least 1")
    span = (s - 1) * min_sep + 1
    if span > n:
        raise ValueError(
            f"support with separation {min_sep} needs span {span} > n={n}")
    rng = np.random.default_rng(seed)
    compressed = rng.choice(n - (s - 1) * (min_sep - 1), size=s, replace=False)
    compressed.sort()
    support = compressed + np.arange(s) * (min_sep - 1)
    signal = np.zeros(n)
    signal[support] = rng.standard_normal(s)
    return signal


def gen_initial_point(signal: Array, seed: int) -> Array:
    """Perturbation of the ground truth with componentwise variance 1/2."""
    signal = np.asarray(signal, dtype=float)
    rng = np.random.default_rng(seed)
    return signal + rng.normal(0.0, np.sqrt(0.5), size=signal.shape)


@dataclass(frozen=True)
class SparseRecoveryInstance:
    """Sensing matrix, exact measurement, ground truth and a start point."""

    A: Array
    b: Array
    signal: Array
    sparsity: int
    variant: str
    top_k: int | None = None
    refinement: int | None = None
    x0: Array | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == L1_MINUS_TOPK and self.top_k is None:
            object.__setattr__(self, "top_k", self.sparsity)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]


def make_recovery_instance(n: int, m: int, s: int, matrix: str = "gaussian",
                           variant: str = L1_MINUS_TOPK,
                           refinement: int | None = None, top_k: int | None = None,
                           seed: int = 0) -> SparseRecoveryInstance:
    """Build one benchmark instance; all randomness derives from ``seed``.

    Oversampled cosine sensing enforces the support separation ``2 F``; the
    other matrix kinds place no separation constraint.
    """
    if matrix == "gaussian":
        A = gen_gaussian_matrix(m, n, seed)
        min_sep = 1
    elif matrix == "dct":
        A = gen_dct_matrix(m, n, seed)
        min_sep = 1
    elif matrix == "oversampled_dct":
        if refinement is None:
            raise ValueError("oversampled sensing needs a refinement factor")
        A = gen_oversampled_dct(m, n, refinement, seed)
        min_sep = 2 * refinement
    else:
        raise ValueError(f"unknown sensing matrix kind {matrix!r}")
    signal = gen_sparse_signal(n, s, min_sep, seed + 1)
    x0 = gen_initial_point(signal, seed + 2)
    return SparseRecoveryInstance(A=A, b=A @ signal, signal=signal, sparsity=s,
                                  variant=variant, top_k=top_k,
                                  refinement=refinement, x0=x0)


def largest_k_norm(x: Array, k: int) -> tuple[float, Array]:
    """Sum of the k largest magnitudes with one subgradient.

    Magnitude ties break to the lowest index; selected zero entries
    contribute +1 to the subgradient.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range [1, {n}]")
    order = np.lexsort((np.arange(n), -np.abs(x)))
    selected = order[:k]
    value = float(np.abs(x[selected]).sum())
    sub = np.zeros(n)
    signs = np.sign(x[selected])
    signs[signs == 0] = 1.0
    sub[selected] = signs
    return value, sub


def l2_subgradient(x: Array) -> Array:
    """``x/||x||`` away from the origin, the zero vector at it."""
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        return np.zeros_like(x)
    return x / norm


def _l1_oracle(x):
    return float(np.abs(x).sum()), np.sign(x)


def build_recovery_program(instance: SparseRecoveryInstance) -> DcProgram:
    """Program ``min ||x||_1 - h(x)  s.t.  Ax = b`` for the chosen variant."""
    if instance.variant == L1_MINUS_L2:
        def h(x):
            return float(np.linalg.norm(x)), l2_subgradient(x)
    else:
        k = instance.top_k

        def h(x):
            return largest_k_norm(x, k)

    return DcProgram(n=instance.n, g=_l1_oracle, h=h,
                     A=instance.A, b=instance.b)


def recovery_tolerances(variant: str) -> tuple[float, float]:
    """Termination tolerances (step, feasibility) for this family."""
    return 1.0, 1e-5 if variant == L1_MINUS_TOPK else 1e-4


def recovery_solver_params(instance: SparseRecoveryInstance,
                           **overrides) -> SolverParams:
    tol_step, tol_feas = recovery_tolerances(instance.variant)
    settings = dict(inner_solver=l1_composite_inner, sigma0=100.0, eps0=0.1,
                    q=1e-4, tol_step=tol_step, tol_feas=tol_feas,
                    max_outer=1000)
    settings.update(overrides)
    return SolverParams(**settings)


def recovery_safeguard_start(instance: SparseRecoveryInstance) -> Array:
    """Initial equality safeguard: all entries equal to the measurement count."""
    return float(instance.m) * np.ones(instance.m)


def recovery_dca_params(instance: SparseRecoveryInstance,
                        **overrides) -> DcaParams:
    tol_step, tol_feas = recovery_tolerances(instance.variant)
    settings = dict(inner_solver=l1_composite_inner, tol=1e-3,
                    alm_tol=min(tol_step, tol_feas) / 10.0, **overrides)
    return DcaParams(**settings)


def relative_error(x: Array, signal: Array) -> float:
    return float(np.linalg.norm(np.asarray(x) - signal) / np.linalg.norm(signal))
