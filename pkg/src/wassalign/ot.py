"""Exact discrete optimal transport: values, plans, Kantorovich potentials.

The transport LP is solved by the revised simplex in `wassalign.lp`; returned
potentials are the LP row duals with the source side canonicalized through the
cbar-transform, so that phi = psi^cbar holds exactly.  A separate quantile
solver handles measures on the line, where the monotone coupling is optimal
for costs |y - z|^p with p >= 1; it produces the same value/potential
contracts at a fraction of the cost.

Transforms follow the asymmetric convention
    cbar_transform(psi)[i] = min_j (C[i, j] - psi[j])   (potential on sources)
    c_transform(phi)[j]    = min_i (C[i, j] - phi[i])   (potential on targets)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wassalign.lp import LpProblem, LpSolverError, LpStatus, solve_lp

__all__ = [
    "TransportPlan",
    "PotentialPair",
    "OtResult",
    "wasserstein",
    "wasserstein_1d",
    "c_transform",
    "cbar_transform",
]

MARGINAL_TOL = 1e-8
DUAL_FEAS_TOL = 1e-8


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative coupling matrix with prescribed row and column sums."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2:
            raise ValueError(f"plan must be a matrix, got shape {m.shape}")
        if m.min(initial=0.0) < -1e-12:
            raise ValueError("negative plan entry")
        object.__setattr__(self, "matrix", m)

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    def check_marginals(self, p: np.ndarray, q: np.ndarray, tol: float = MARGINAL_TOL) -> None:
        if np.max(np.abs(self.row_sums() - p)) > tol:
            raise ValueError("plan row sums do not match source weights")
        if np.max(np.abs(self.col_sums() - q)) > tol:
            raise ValueError("plan column sums do not match target weights")

    @property
    def nnz(self) -> int:
        return int(np.count_nonzero(self.matrix > 1e-12))


@dataclass(frozen=True)
class PotentialPair:
    """Dual pair (phi on sources, psi on targets) with phi_i + psi_j <= C_ij."""

    phi: np.ndarray
    psi: np.ndarray

    def objective(self, p: np.ndarray, q: np.ndarray) -> float:
        return float(self.phi @ p + self.psi @ q)

    def feasibility_violation(self, C: np.ndarray) -> float:
        return float(np.max(self.phi[:, None] + self.psi[None, :] - C, initial=-np.inf))


@dataclass(frozen=True)
class OtResult:
    value: float
    plan: TransportPlan
    potentials: PotentialPair


def cbar_transform(psi: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Row-wise minimum of C_ij - psi_j: the cbar-transform on the source side."""
    psi = np.asarray(psi, dtype=float)
    C = np.asarray(C, dtype=float)
    if psi.shape != (C.shape[1],):
        raise ValueError(f"psi has shape {psi.shape}, cost has {C.shape[1]} columns")
    return (C - psi[None, :]).min(axis=1)


def c_transform(phi: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Column-wise minimum of C_ij - phi_i: the c-transform on the target side."""
    phi = np.asarray(phi, dtype=float)
    C = np.asarray(C, dtype=float)
    if phi.shape != (C.shape[0],):
        raise ValueError(f"phi has shape {phi.shape}, cost has {C.shape[0]} rows")
    return (C - phi[:, None]).min(axis=0)


def _validate_weights(p, q, C):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    C = np.asarray(C, dtype=float)
    if C.ndim != 2:
        raise ValueError(f"cost must be a matrix, got shape {C.shape}")
    if p.shape != (C.shape[0],) or q.shape != (C.shape[1],):
        raise ValueError(
            f"weights ({p.shape}, {q.shape}) do not match cost shape {C.shape}"
        )
    for w, name in ((p, "p"), (q, "q")):
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"{name} is not a probability vector")
    if not np.all(np.isfinite(C)):
        raise ValueError("non-finite cost entry")
    return p, q, C


def wasserstein(p, q, C) -> OtResult:
    """Exact OT between weight vectors p, q under the cost matrix C.

    Returns the minimal cost, an optimal (vertex) plan, and Kantorovich
    potentials from the LP row duals.  The source potential is recomputed as
    cbar_transform(psi), which keeps the dual objective and yields the
    canonical cbar-concave representative.

    Raises:
        LpSolverError: the inner LP solve did not return an optimal status.
    """
    p, q, C = _validate_weights(p, q, C)
    N, M = C.shape
    prob = LpProblem(N * M, objective=C.ravel())
    cols = np.arange(N * M).reshape(N, M)
    for i in range(N):
        prob.add_row(cols[i], np.ones(M), "==", p[i])
    for j in range(M):
        prob.add_row(cols[:, j], np.ones(N), "==", q[j])
    sol = solve_lp(prob)
    if sol.status is not LpStatus.OPTIMAL:
        raise LpSolverError(f"transport LP ended with status {sol.status.value}: {sol.message}")
    plan = TransportPlan(sol.primal.reshape(N, M))
    psi = sol.dual_rows[N:]
    phi = cbar_transform(psi, C)
    return OtResult(float(sol.objective), plan, PotentialPair(phi, psi))


# ---------------------------------------------------------------------------
# measures on the line
# ---------------------------------------------------------------------------


def _monotone_coupling(y_s, p_s, z_s, q_s):
    """Two-pointer mass splitting along sorted supports.

    Returns (i_idx, j_idx, mass) triples of the quantile coupling and the list
    of (i, j) edges used for potential propagation (includes the zero-mass
    staircase edges inserted when both atoms exhaust simultaneously).
    """
    N, M = len(y_s), len(z_s)
    ii: list = []
    jj: list = []
    mm: list = []
    prop_edges = []
    i = j = 0
    ri, rj = p_s[0], q_s[0]
    prop_edges.append((0, 0))
    while True:
        move = min(ri, rj)
        ii.append(i)
        jj.append(j)
        mm.append(move)
        ri -= move
        rj -= move
        adv_i = ri <= 0.0 and i + 1 < N
        adv_j = rj <= 0.0 and j + 1 < M
        if not adv_i and not adv_j:
            break
        if adv_i and adv_j:
            # tie: step through (i+1, j) with zero mass to keep the chain connected
            i += 1
            ri = p_s[i]
            prop_edges.append((i, j))
            j += 1
            rj = q_s[j]
            prop_edges.append((i, j))
        elif adv_i:
            i += 1
            ri = p_s[i]
            prop_edges.append((i, j))
        else:
            j += 1
            rj = q_s[j]
            prop_edges.append((i, j))
    return np.array(ii), np.array(jj), np.array(mm), prop_edges


def _propagate_potentials(cost_edge, prop_edges, N, M):
    """Solve phi_i + psi_j = c_ij along the connected staircase of edges."""
    phi = np.full(N, np.nan)
    psi = np.full(M, np.nan)
    phi[0] = 0.0
    for i, j in prop_edges:
        if np.isnan(psi[j]):
            psi[j] = cost_edge(i, j) - phi[i]
        elif np.isnan(phi[i]):
            phi[i] = cost_edge(i, j) - psi[j]
    return phi, psi


def wasserstein_1d(y, p, z, q, power: float = 2.0, return_plan: bool = True) -> OtResult:
    """Exact OT on the line for the cost |y - z|^power, power >= 1.

    The monotone (quantile) coupling is optimal for convex costs; potentials
    are propagated along the coupling's staircase and verified against the
    primal value, falling back to a cbar/c canonicalization if needed.
    """
    y = np.asarray(y, dtype=float).ravel()
    z = np.asarray(z, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if power < 1.0:
        raise ValueError("power must be >= 1")
    if y.shape != p.shape or z.shape != q.shape:
        raise ValueError("points and weights length mismatch")
    if np.any(p <= 0) or np.any(q <= 0):
        raise ValueError("wasserstein_1d requires strictly positive weights")

    order_y = np.argsort(y, kind="stable")
    order_z = np.argsort(z, kind="stable")
    y_s, p_s = y[order_y], p[order_y]
    z_s, q_s = z[order_z], q[order_z]
    N, M = y.size, z.size

    ii, jj, mm, prop_edges = _monotone_coupling(y_s, p_s, z_s, q_s)
    value = float(mm @ np.abs(y_s[ii] - z_s[jj]) ** power)

    def cost_edge(i, j):
        return abs(y_s[i] - z_s[j]) ** power

    phi_s, psi_s = _propagate_potentials(cost_edge, prop_edges, N, M)

    # verify the propagated pair; canonicalize if the staircase left slack
    feas, gap = _check_1d_potentials(y_s, p_s, z_s, q_s, phi_s, psi_s, power, value)
    if not feas or gap > 1e-9 * (1.0 + abs(value)):
        phi_s = _cbar_1d(y_s, z_s, psi_s, power)
        feas, gap = _check_1d_potentials(y_s, p_s, z_s, q_s, phi_s, psi_s, power, value)
        if not feas or gap > 1e-8 * (1.0 + abs(value)):
            raise ArithmeticError(
                f"1-d potentials failed verification (gap {gap:.3e}); "
                "cost may not be convex on this data"
            )

    phi = np.empty(N)
    psi = np.empty(M)
    phi[order_y] = phi_s
    psi[order_z] = psi_s

    if return_plan:
        matrix = np.zeros((N, M))
        np.add.at(matrix, (order_y[ii], order_z[jj]), mm)
        plan = TransportPlan(matrix)
    else:
        plan = TransportPlan(np.zeros((0, 0)))
    return OtResult(value, plan, PotentialPair(phi, psi))


def _cbar_1d(y_s, z_s, psi_s, power, chunk: int = 512):
    phi = np.empty(y_s.size)
    for a in range(0, y_s.size, chunk):
        block = np.abs(y_s[a : a + chunk, None] - z_s[None, :]) ** power
        phi[a : a + chunk] = (block - psi_s[None, :]).min(axis=1)
    return phi


def _check_1d_potentials(y_s, p_s, z_s, q_s, phi_s, psi_s, power, value, chunk: int = 512):
    worst = -np.inf
    for a in range(0, y_s.size, chunk):
        block = np.abs(y_s[a : a + chunk, None] - z_s[None, :]) ** power
        viol = phi_s[a : a + chunk, None] + psi_s[None, :] - block
        worst = max(worst, float(viol.max()))
    dual = float(phi_s @ p_s + psi_s @ q_s)
    feasible = worst <= 1e-9 * (1.0 + abs(value))
    return feasible, abs(dual - value)
