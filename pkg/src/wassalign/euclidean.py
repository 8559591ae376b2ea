"""Euclidean-case diagnostics for orthogonal-projection alignment.

For whitened measures (zero mean, identity covariance) and a matrix A with
orthonormal columns, the squared-distance transport integrals computed in the
big space (x against A z) and in the small space (A^T x against z) differ by
the constant n - d for EVERY coupling of the two measures, because the
residual ||x - Proj_range(A) x||^2 integrates to tr(I_n) - tr(A A^T) = n - d
under the whitened source.

The cross-correlation check is the discrete surrogate of a first-order
optimality condition: at a local minimizer of the projection objective, the
matrix E[Tbar(Z)_a Z_b] built from the barycentric projection Tbar of an
optimal plan should be symmetric.  It is reported as a diagnostic defect,
never as a pass/fail theorem test, since the underlying statement assumes an
absolutely continuous target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wassalign.measures import DiscreteMeasure, stiefel_validate
from wassalign.ot import TransportPlan

__all__ = [
    "UpDownCheck",
    "CrossCorrelation",
    "updown_check",
    "barycentric_map",
    "cross_correlation",
]

WHITENED_TOL = 1e-10


@dataclass(frozen=True)
class UpDownCheck:
    up_integral: float
    down_integral: float
    expected_gap: float

    @property
    def residual(self) -> float:
        return abs(self.up_integral - self.down_integral - self.expected_gap)


@dataclass(frozen=True)
class CrossCorrelation:
    matrix: np.ndarray  # (d, d)

    @property
    def defect(self) -> float:
        d = self.matrix.shape[0]
        if d < 2:
            return 0.0
        return float(np.max(np.abs(self.matrix - self.matrix.T)))


def _require_whitened(m: DiscreteMeasure, name: str) -> None:
    mean_dev = float(np.max(np.abs(m.mean())))
    cov_dev = float(np.max(np.abs(m.covariance() - np.eye(m.dim))))
    if mean_dev > WHITENED_TOL or cov_dev > WHITENED_TOL:
        raise ValueError(
            f"{name} is not whitened (mean deviation {mean_dev:.2e}, "
            f"covariance deviation {cov_dev:.2e})"
        )


def updown_check(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    A: np.ndarray,
    gamma: TransportPlan | None = None,
) -> UpDownCheck:
    """Compare the two transport integrals through A under a given coupling.

    gamma defaults to the product coupling; any coupling of (mu, nu) yields
    the same difference n - d.

    Raises:
        ValueError: non-whitened inputs, non-Stiefel A, or an inconsistent
            coupling.
    """
    A = np.asarray(A, dtype=float)
    if not stiefel_validate(A):
        raise ValueError("A does not have orthonormal columns")
    n, d = A.shape
    if mu.dim != n or nu.dim != d:
        raise ValueError(f"A is {n}x{d} but measures live in R^{mu.dim}, R^{nu.dim}")
    _require_whitened(mu, "mu")
    _require_whitened(nu, "nu")
    if gamma is None:
        plan = np.outer(mu.weights, nu.weights)
    else:
        gamma.check_marginals(mu.weights, nu.weights)
        plan = gamma.matrix

    X, Z = mu.points, nu.points
    # up: sum_ij plan_ij ||x_i - A z_j||^2
    AZ = Z @ A.T
    up = (
        float(plan.sum(axis=1) @ np.einsum("id,id->i", X, X))
        - 2.0 * float(np.einsum("ij,ij->", plan, X @ AZ.T))
        + float(plan.sum(axis=0) @ np.einsum("jd,jd->j", AZ, AZ))
    )
    # down: sum_ij plan_ij ||A^T x_i - z_j||^2
    XA = X @ A
    down = (
        float(plan.sum(axis=1) @ np.einsum("id,id->i", XA, XA))
        - 2.0 * float(np.einsum("ij,ij->", plan, XA @ Z.T))
        + float(plan.sum(axis=0) @ np.einsum("jd,jd->j", Z, Z))
    )
    return UpDownCheck(up, down, float(n - d))


def barycentric_map(plan: TransportPlan, source_images: np.ndarray) -> np.ndarray:
    """Conditional mean of the source images under the plan, per target atom.

    Tbar[j] = sum_i plan_ij y_i / sum_i plan_ij.

    Raises:
        ValueError: some target atom receives no mass.
    """
    Y = np.asarray(source_images, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != plan.matrix.shape[0]:
        raise ValueError(
            f"{Y.shape[0]} source images for a plan with {plan.matrix.shape[0]} rows"
        )
    col_mass = plan.col_sums()
    if np.any(col_mass <= 0.0):
        raise ValueError("zero column mass: barycentric projection undefined")
    return (plan.matrix.T @ Y) / col_mass[:, None]


def cross_correlation(
    plan: TransportPlan,
    nu: DiscreteMeasure,
    source_images: np.ndarray,
) -> CrossCorrelation:
    """Cross-correlation matrix C_ab = sum_j q_j Tbar(z_j)_a (z_j)_b."""
    if plan.matrix.shape[1] != nu.size:
        raise ValueError("plan and target measure sizes differ")
    tbar = barycentric_map(plan, source_images)
    if tbar.shape[1] != nu.dim:
        raise ValueError(
            f"source images have dimension {tbar.shape[1]}, target has {nu.dim}"
        )
    C = (tbar * nu.weights[:, None]).T @ nu.points
    return CrossCorrelation(C)
