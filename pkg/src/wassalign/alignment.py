"""Penalized Wasserstein alignment over a finite transform family.

The alignment value min_k { OT(p, q, c_..k) + R_k } is computed three
independent ways, which cross-certify each other:

  solve_dual           a convex dual LP over (xi, psi): maximize
                       sum_i p_i xi_i0 + sum_j q_j psi_j0 subject to
                       xi_ik + psi_jk <= c_ijk + R_k and mean-consistency on
                       both sides (sum_i p_i xi_ik and sum_j q_j psi_jk are
                       constant in k);
  solve_relaxed_primal the linear relaxation over couplings gamma(x, theta, z)
                       with X ~ mu, Z ~ nu, and theta independent of X and of
                       Z -- the LP dual of solve_dual;
  brute_force          one exact OT solve per family entry.

Why the target potential carries a family index: with a single psi_j the LP
is the relaxation in which only X is independent of theta, and that
relaxation may split nu across transforms (each theta-channel must carry all
of mu but only a slice of nu), driving the value strictly below the true
minimum.  Requiring theta independent of both ends forces every channel to
transport all of mu onto all of nu, so the relaxed value is a convex
combination of the per-entry objectives and the duality is exact.  With one
family entry the LP reduces to plain Kantorovich duality.

At an optimum, every family entry carrying channel mass has its (xi, psi)
columns equal to a pair of Kantorovich potentials for that entry, which is
how the optimizer set is read off by complementary slackness.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from wassalign.lp import LpProblem, LpSolverError, LpStatus, solve_lp
from wassalign.measures import CostSpec, CostTensor, DiscreteMeasure, build_cost_tensor
from wassalign.ot import (
    OtResult,
    PotentialPair,
    TransportPlan,
    c_transform,
    cbar_transform,
    wasserstein,
    wasserstein_1d,
)

logger = logging.getLogger(__name__)

__all__ = [
    "AlignmentDual",
    "ThetaExtraction",
    "BruteForceResult",
    "RelaxedPrimal",
    "GapCertificate",
    "AlignmentReport",
    "per_entry_ot",
    "solve_dual",
    "extract_theta",
    "brute_force",
    "solve_relaxed_primal",
    "compute_J_psi",
    "gap_certificate",
    "align",
    "report_from_dual",
]

# largest N*M*l posed as an explicit LP; beyond it the certificate path runs
LP_CELL_LIMIT = 120_000
# largest N*M*l for which the dense cost tensor is materialized at all
TENSOR_CELL_LIMIT = 2_000_000
ARGMIN_TOL = 1e-7
WITNESS_TOL = 1e-6


@dataclass(frozen=True)
class AlignmentDual:
    """Feasible (optimal) point of the alignment dual LP.

    xi[i, k] bounds min_j (c_ijk + R_k - psi_jk) from below; psi[:, k] is the
    target potential attached to family entry k.  All xi columns share the
    same p-mean and all psi columns the same q-mean; the objective value is
    their sum.
    """

    xi: np.ndarray  # (N, l)
    psi: np.ndarray  # (M, l)
    value: float

    def psi_at(self, k: int) -> np.ndarray:
        return self.psi[:, k]

    def feasibility_violation(self, ct: CostTensor) -> float:
        """max over (i, j, k) of xi_ik + psi_jk - (c_ijk + R_k)."""
        folded = ct.folded()
        worst = -np.inf
        for k in range(folded.shape[2]):
            v = self.xi[:, k, None] + self.psi[None, :, k] - folded[:, :, k]
            worst = max(worst, float(v.max()))
        return worst

    def mean_consistency_violation(self, p: np.ndarray, q: np.ndarray | None = None) -> float:
        """Deviation of the per-entry means from their k = 0 reference."""
        worst = float(np.max(np.abs(p @ self.xi - p @ self.xi[:, 0])))
        if q is not None:
            worst = max(worst, float(np.max(np.abs(q @ self.psi - q @ self.psi[:, 0]))))
        return worst


@dataclass(frozen=True)
class ThetaExtraction:
    """Argmin data read off an optimal dual: the I-curve and its minimizers.

    witness_k is an index in k_star where xi equals the folded cbar-transform
    row within WITNESS_TOL (the complementary-slackness characterization);
    None means the check failed and was logged as a certificate warning.
    """

    k_star: list
    i_curve: np.ndarray
    witness_k: int | None
    witness_gap: float


@dataclass(frozen=True)
class BruteForceResult:
    k_star: list
    value: float
    per_theta: np.ndarray


@dataclass(frozen=True)
class RelaxedPrimal:
    value: float
    gamma: np.ndarray  # (N, l, M)

    def theta_marginal(self) -> np.ndarray:
        return self.gamma.sum(axis=(0, 2))


@dataclass(frozen=True)
class GapCertificate:
    """Primal gap delta, dual gap g, and the curve difference they must sum to."""

    delta: float
    g: float
    rhs: float

    @property
    def identity_residual(self) -> float:
        return abs(self.delta + self.g - self.rhs)


@dataclass(frozen=True)
class AlignmentReport:
    theta_star: int
    theta_star_label: str
    k_star: list
    value: float
    i_curve: np.ndarray
    gap_curve: np.ndarray
    per_theta: np.ndarray
    plan: TransportPlan
    potentials: PotentialPair
    dual: AlignmentDual


def _psibar_folded(psi: np.ndarray, folded: np.ndarray) -> np.ndarray:
    """(N, l) array of min_j (folded[i, j, k] - psi[j, k]).

    psi may be a single vector (broadcast across entries) or an (M, l) array.
    """
    if psi.ndim == 1:
        return (folded - psi[None, :, None]).min(axis=1)
    return (folded - psi[None, :, :]).min(axis=1)


def _canonical_potentials(raw_psi: np.ndarray, C: np.ndarray) -> PotentialPair:
    """Replace an optimal psi by its cbar-concave representative.

    psi* = (psi^cbar)^c satisfies psi* >= psi and (psi*)^cbar = psi^cbar, so
    the pair ((psi*)^cbar, psi*) is feasible with the same optimal objective.
    """
    phi = cbar_transform(raw_psi, C)
    psi_star = c_transform(phi, C)
    return PotentialPair(cbar_transform(psi_star, C), psi_star)


# ---------------------------------------------------------------------------
# the three solution routes
# ---------------------------------------------------------------------------


def per_entry_ot(mu: DiscreteMeasure, nu: DiscreteMeasure, ct: CostTensor):
    """One exact OT solve per family entry; returns (per_theta, solves)."""
    l = ct.shape[2]
    per_theta = np.empty(l)
    solves = []
    for k in range(l):
        res = wasserstein(mu.weights, nu.weights, ct.slice(k))
        solves.append(res)
        per_theta[k] = res.value + ct.penalties[k]
    return per_theta, solves


def brute_force(mu: DiscreteMeasure, nu: DiscreteMeasure, ct: CostTensor) -> BruteForceResult:
    """Literal minimum over the family of per-entry OT value plus penalty."""
    per_theta, _ = per_entry_ot(mu, nu, ct)
    value = float(per_theta.min())
    k_star = [int(k) for k in np.flatnonzero(per_theta <= value + ARGMIN_TOL)]
    return BruteForceResult(k_star, value, per_theta)


def solve_dual(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    ct: CostTensor,
    method: str = "auto",
) -> AlignmentDual:
    """Solve the alignment dual exactly.

    method: "lp" poses the (xi, psi) LP and runs the simplex; "certificate"
    assembles an optimal dual point from the per-entry OT potentials, exact
    by a weak-duality certificate; "auto" picks "lp" up to LP_CELL_LIMIT
    inequality rows.
    """
    N, M, l = ct.shape
    if method == "auto":
        method = "lp" if N * M * l <= LP_CELL_LIMIT else "certificate"
    if method == "lp":
        return _solve_dual_lp(mu.weights, nu.weights, ct)
    if method == "certificate":
        per_theta, solves = per_entry_ot(mu, nu, ct)
        return _assemble_dual(per_theta, solves, ct, mu.weights, nu.weights)
    raise ValueError(f"unknown method {method!r}")


def _solve_dual_lp(p: np.ndarray, q: np.ndarray, ct: CostTensor) -> AlignmentDual:
    N, M, l = ct.shape
    folded = ct.folded()
    n_vars = N * l + M * l
    obj = np.zeros(n_vars)
    obj[np.arange(N) * l] = p  # xi_{i, 0} carries the source integral
    obj[N * l + np.arange(M) * l] = q  # psi_{j, 0} the target integral
    prob = LpProblem(n_vars, objective=obj, maximize=True)
    prob.set_bounds(lower=-np.inf)

    xi_cols = np.arange(N * l).reshape(N, l)
    psi_cols = (N * l + np.arange(M * l)).reshape(M, l)
    for i in range(N):
        for k in range(l):
            col_xi = xi_cols[i, k]
            row_rhs = folded[i, :, k]
            for j in range(M):
                prob.add_row((col_xi, psi_cols[j, k]), (1.0, 1.0), "<=", row_rhs[j])
    for k in range(1, l):
        prob.add_row(
            np.concatenate([xi_cols[:, k], xi_cols[:, 0]]),
            np.concatenate([p, -p]),
            "==",
            0.0,
        )
        prob.add_row(
            np.concatenate([psi_cols[:, k], psi_cols[:, 0]]),
            np.concatenate([q, -q]),
            "==",
            0.0,
        )

    sol = solve_lp(prob)
    if sol.status is not LpStatus.OPTIMAL:
        raise LpSolverError(f"alignment dual LP status {sol.status.value}: {sol.message}")
    xi = sol.primal[: N * l].reshape(N, l)
    psi = sol.primal[N * l :].reshape(M, l)
    return AlignmentDual(xi, psi, float(sol.objective))


def _assemble_dual(per_theta, solves, ct: CostTensor, p, q) -> AlignmentDual:
    """Exact optimal dual from per-entry Kantorovich potentials.

    For each entry, shift the potentials so that all psi columns share the
    q-mean of the optimizer's column, and absorb the per-entry suboptimality
    alpha_k = per_theta[k] - value into the xi side.  The pair stays feasible
    (alpha_k >= 0 only lowers xi) and its objective telescopes to the
    brute-force value, which certifies optimality by weak duality.
    """
    N, M, l = ct.shape
    value = float(per_theta.min())
    k0 = int(np.argmin(per_theta))
    xi = np.empty((N, l))
    psi = np.empty((M, l))
    pots = []
    for k in range(l):
        if k == k0:
            pots.append(_canonical_potentials(solves[k].potentials.psi, ct.slice(k)))
        else:
            pots.append(solves[k].potentials)
    T = float(pots[k0].psi @ q)
    for k in range(l):
        alpha = per_theta[k] - value
        t_k = T - float(pots[k].psi @ q)
        psi[:, k] = pots[k].psi + t_k
        xi[:, k] = pots[k].phi + ct.penalties[k] - alpha - t_k
    return AlignmentDual(xi, psi, value)


def solve_relaxed_primal(
    mu: DiscreteMeasure, nu: DiscreteMeasure, ct: CostTensor
) -> RelaxedPrimal:
    """Linear relaxation over couplings of (X, theta, Z), theta independent
    of each end.

    Variables gamma[i, k, j] >= 0; rows fix the X- and Z-marginals and impose
    sum_j gamma_ikj = p_i r_k and sum_i gamma_ikj = q_j r_k, where r_k is the
    theta-marginal mass of entry k.  This is the LP dual of solve_dual.
    """
    N, M, l = ct.shape
    p, q = mu.weights, nu.weights
    folded = ct.folded()
    n_vars = N * l * M
    obj = np.ascontiguousarray(folded.transpose(0, 2, 1)).ravel()  # (i, k, j) order
    prob = LpProblem(n_vars, objective=obj)

    for i in range(N):
        prob.add_row(np.arange(i * l * M, (i + 1) * l * M), np.ones(l * M), "==", p[i])
    base_j = M * np.arange(N * l)
    for j in range(M):
        prob.add_row(base_j + j, np.ones(N * l), "==", q[j])
    block = np.arange(M)
    entry_cols = [
        (np.arange(N)[:, None] * l * M + k * M + block[None, :]).ravel() for k in range(l)
    ]
    for i in range(N):
        for k in range(l):
            vals = np.full((N, M), -p[i])
            vals[i, :] += 1.0
            prob.add_row(entry_cols[k], vals.ravel(), "==", 0.0)
    for j in range(M):
        for k in range(l):
            vals = np.full((N, M), -q[j])
            vals[:, j] += 1.0
            prob.add_row(entry_cols[k], vals.ravel(), "==", 0.0)

    sol = solve_lp(prob, orientation="direct")
    if sol.status is not LpStatus.OPTIMAL:
        raise LpSolverError(f"relaxed primal LP status {sol.status.value}: {sol.message}")
    gamma = sol.primal.reshape(N, l, M)
    return RelaxedPrimal(float(sol.objective), gamma)


# ---------------------------------------------------------------------------
# extraction, J-lift, gap certificates
# ---------------------------------------------------------------------------


def extract_theta(dual: AlignmentDual, ct: CostTensor, p: np.ndarray) -> ThetaExtraction:
    """Optimal family entries from the dual potentials.

    i_curve[k] = sum_i p_i min_j (c_ijk - psi_jk) + R_k; its argmin set
    (within ARGMIN_TOL) contains every entry carrying channel mass at the
    optimum.  Also verifies the slack witness: some argmin k must satisfy
    xi_ik = min_j (c_ijk + R_k - psi_jk) for every i.
    """
    folded = ct.folded()
    psibar = _psibar_folded(dual.psi, folded)
    return _extract_from_psibar(dual, psibar, p)


def _extract_from_psibar(dual: AlignmentDual, psibar: np.ndarray, p: np.ndarray) -> ThetaExtraction:
    i_curve = p @ psibar
    i_min = float(i_curve.min())
    k_star = [int(k) for k in np.flatnonzero(i_curve <= i_min + ARGMIN_TOL)]

    witness_k = None
    witness_gap = np.inf
    for k in k_star:
        gap = float(np.max(np.abs(dual.xi[:, k] - psibar[:, k])))
        witness_gap = min(witness_gap, gap)
        if gap <= WITNESS_TOL:
            witness_k = k
            break
    if witness_k is None:
        logger.warning(
            "certificate warning: no argmin entry matches the cbar-transform rows "
            "(best deviation %.3e)",
            witness_gap,
        )
    return ThetaExtraction(k_star, i_curve, witness_k, witness_gap)


def compute_J_psi(psi: np.ndarray, ct: CostTensor, p: np.ndarray) -> np.ndarray:
    """Lift a single target potential to a dual-feasible source array.

    J[i, k] = min_j (c_ijk - psi_j) + R_k - I_psi(k) + min_k I_psi(k), so the
    pair (J, psi broadcast over entries) always satisfies the dual
    constraints, and every column of J has the same p-weighted mean, namely
    min_k I_psi(k).  Its objective min_k I_psi(k) + q.psi never exceeds the
    alignment value, with equality exactly when psi certifies the optimizer.
    """
    psi = np.asarray(psi, dtype=float)
    folded = ct.folded()
    if psi.shape != (folded.shape[1],):
        raise ValueError(f"psi shape {psi.shape} does not match M={folded.shape[1]}")
    psibar = _psibar_folded(psi, folded)
    i_curve = p @ psibar
    return psibar - i_curve[None, :] + float(i_curve.min())


def gap_certificate(
    k0: int,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    ct: CostTensor,
    dual_value: float,
    ot_result: OtResult | None = None,
) -> GapCertificate:
    """Primal/dual optimality gaps at family entry k0 and their exact link.

    delta = per-entry objective at k0 minus the alignment value; g is the
    suboptimality of the single-potential dual lift built from the k0 OT
    solve; the identity delta + g = I(k0) - min_k I holds up to solver
    tolerance, and both gaps are nonnegative.
    """
    N, M, l = ct.shape
    if not 0 <= k0 < l:
        raise ValueError(f"k0={k0} out of range for l={l}")
    if ot_result is None:
        ot_result = wasserstein(mu.weights, nu.weights, ct.slice(k0))
    pot = _canonical_potentials(ot_result.potentials.psi, ct.slice(k0))
    folded = ct.folded()
    psibar = _psibar_folded(pot.psi, folded)
    i_curve = mu.weights @ psibar
    i_min = float(i_curve.min())
    delta = float(ot_result.value + ct.penalties[k0] - dual_value)
    g = float(dual_value - (i_min + pot.psi @ nu.weights))
    rhs = float(i_curve[k0] - i_min)
    return GapCertificate(delta, g, rhs)


# ---------------------------------------------------------------------------
# full report
# ---------------------------------------------------------------------------


def align(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    fam,
    cost: CostSpec,
    method: str = "auto",
) -> AlignmentReport:
    """End-to-end alignment: dual solve, extraction, plan, and gap curve.

    Instances whose dense cost tensor would exceed TENSOR_CELL_LIMIT cells are
    routed through the projected path, available when the target space is the
    line and the cost is a power of the distance.
    """
    if mu.size * nu.size * len(fam) > TENSOR_CELL_LIMIT:
        return _align_projected_1d(mu, nu, fam, cost)
    ct = build_cost_tensor(mu, nu, fam, cost)
    per_theta, solves = per_entry_ot(mu, nu, ct)
    value = float(per_theta.min())
    bf = BruteForceResult(
        [int(k) for k in np.flatnonzero(per_theta <= value + ARGMIN_TOL)], value, per_theta
    )
    resolved = method
    if resolved == "auto":
        N, M, l = ct.shape
        resolved = "lp" if N * M * l <= LP_CELL_LIMIT else "certificate"
    if resolved == "lp":
        dual = _solve_dual_lp(mu.weights, nu.weights, ct)
    elif resolved == "certificate":
        dual = _assemble_dual(per_theta, solves, ct, mu.weights, nu.weights)
    else:
        raise ValueError(f"unknown method {method!r}")
    return report_from_dual(mu, nu, ct, dual, labels=fam.labels, bf=bf)


def report_from_dual(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    ct: CostTensor,
    dual: AlignmentDual,
    labels=None,
    bf: BruteForceResult | None = None,
) -> AlignmentReport:
    """Assemble the standard report around an already-solved dual.

    The canonical optimizer is the smallest index in the intersection of the
    dual's I-curve argmin with the per-entry objective argmin: the I-curve of
    an optimal dual may carry spurious ties at entries whose xi rows saturate
    without carrying channel mass, while the intersection is provably
    nonempty and consists of true optimizers.
    """
    extraction = extract_theta(dual, ct, mu.weights)
    if bf is None:
        bf = brute_force(mu, nu, ct)
    both = [k for k in extraction.k_star if k in set(bf.k_star)]
    k_star = both[0] if both else bf.k_star[0]
    ot_star = wasserstein(mu.weights, nu.weights, ct.slice(k_star))
    gap_curve = bf.per_theta - dual.value
    label = labels[k_star] if labels is not None else str(k_star)
    return AlignmentReport(
        theta_star=k_star,
        theta_star_label=label,
        k_star=extraction.k_star,
        value=dual.value,
        i_curve=extraction.i_curve,
        gap_curve=gap_curve,
        per_theta=bf.per_theta,
        plan=ot_star.plan,
        potentials=ot_star.potentials,
        dual=dual,
    )


def _align_projected_1d(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    fam,
    cost: CostSpec,
) -> AlignmentReport:
    """Large-instance path: 1-d target, cost |y - z|^p, quantile OT per entry."""
    if nu.dim != 1:
        raise ValueError(
            "instance too large for the dense tensor path and the target space "
            "is not one-dimensional"
        )
    if cost.kind == "sq-euclidean":
        power = 2.0
    elif cost.kind == "power":
        power = cost.p
    else:
        raise ValueError("projected path requires a distance-power cost")

    p, q = mu.weights, nu.weights
    z = nu.points[:, 0]
    N, l = mu.size, len(fam)
    penalties = fam.penalties
    ys = [entry.apply(mu.points)[:, 0] for entry in fam]

    per_theta = np.empty(l)
    solves = []
    for k in range(l):
        res = wasserstein_1d(ys[k], p, z, q, power=power, return_plan=False)
        solves.append(res)
        per_theta[k] = res.value + penalties[k]
    value = float(per_theta.min())
    k0 = int(np.argmin(per_theta))

    # canonicalize the optimizer's potential (used for the report and witness)
    ot0 = wasserstein_1d(ys[k0], p, z, q, power=power, return_plan=True)
    C0 = np.abs(ys[k0][:, None] - z[None, :]) ** power
    pot0 = _canonical_potentials(ot0.potentials.psi, C0)

    xi = np.empty((N, l))
    psi = np.empty((z.size, l))
    T = float(pot0.psi @ q)
    for k in range(l):
        pk = pot0 if k == k0 else solves[k].potentials
        alpha = per_theta[k] - value
        t_k = T - float(pk.psi @ q)
        psi[:, k] = pk.psi + t_k
        xi[:, k] = pk.phi + penalties[k] - alpha - t_k
    dual = AlignmentDual(xi, psi, value)

    # i_curve equals the per-entry objectives shifted by the common psi-mean
    i_curve = per_theta - T
    k_star = [int(k) for k in np.flatnonzero(i_curve <= i_curve.min() + ARGMIN_TOL)]
    psibar0 = _cbar_chunked(ys[k0], z, psi[:, k0], power) + penalties[k0]
    witness_gap = float(np.max(np.abs(xi[:, k0] - psibar0)))
    witness_k = k0 if witness_gap <= WITNESS_TOL else None
    if witness_k is None:
        logger.warning("projected path: witness deviation %.3e at the optimizer", witness_gap)
    extraction = ThetaExtraction(k_star, i_curve, witness_k, witness_gap)

    return AlignmentReport(
        theta_star=extraction.k_star[0],
        theta_star_label=fam.labels[extraction.k_star[0]],
        k_star=extraction.k_star,
        value=value,
        i_curve=i_curve,
        gap_curve=per_theta - value,
        per_theta=per_theta,
        plan=ot0.plan,
        potentials=pot0,
        dual=dual,
    )


def _cbar_chunked(y, z, psi, power, chunk: int = 512):
    out = np.empty(y.size)
    for a in range(0, y.size, chunk):
        block = np.abs(y[a : a + chunk, None] - z[None, :]) ** power - psi[None, :]
        out[a : a + chunk] = block.min(axis=1)
    return out
