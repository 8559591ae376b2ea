"""Exact sparse linear programming by a revised simplex method.

Standard-form conversion (free variables split, >= rows negated, finite upper
bounds turned into explicit rows), Phase I with artificial variables, Phase II
with Dantzig pricing switching to Bland's rule for anti-cycling.  The basis
inverse is kept dense and refreshed every REFACTOR_PERIOD pivots.

Problems with far more rows than columns (the alignment dual LP is the
motivating case: N*M*l inequalities over N*l + M variables) are solved through
their LP dual: the dual has one row per original variable, so the simplex
basis stays small, and the original primal/dual pair is recovered exactly from
the dual solve.  `solve_lp(..., orientation=...)` controls this explicitly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = [
    "LpProblem",
    "LpSolution",
    "LpSolverError",
    "LpStatus",
    "solve_lp",
    "check_solution",
]

FEAS_TOL = 1e-8
PIVOT_TOL = 1e-11
GAP_TOL = 1e-7
REFACTOR_PERIOD = 50
MAX_ITERATIONS = 500_000

# Orientation-swap heuristics: only problems this much taller than wide, and
# this large in absolute terms, are solved through their dual.
SWAP_ROW_FACTOR = 4
SWAP_MIN_ROWS = 1000

_RELATIONS = ("<=", "==", ">=")


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    FAILED = "failed"  # numerical breakdown, distinct from infeasible


class LpSolverError(RuntimeError):
    """Raised by callers when a solve does not end in a usable status."""


class LpProblem:
    """min or max of a sparse objective under sparse <=, ==, >= rows.

    Variables default to bounds [0, +inf); use `set_bounds` for free variables
    (lower=-inf) or finite ranges.  All coefficients must be finite.
    """

    def __init__(self, n_vars: int, objective=None, maximize: bool = False):
        if n_vars < 1:
            raise ValueError("an LP needs at least one variable")
        self.n_vars = int(n_vars)
        self.maximize = bool(maximize)
        if objective is None:
            self.objective = np.zeros(self.n_vars)
        else:
            self.objective = np.asarray(objective, dtype=float).copy()
            if self.objective.shape != (self.n_vars,):
                raise ValueError(
                    f"objective shape {self.objective.shape} != ({self.n_vars},)"
                )
            if not np.all(np.isfinite(self.objective)):
                raise ValueError("objective has non-finite coefficients")
        self.lower = np.zeros(self.n_vars)
        self.upper = np.full(self.n_vars, np.inf)
        self._row_cols: list = []
        self._row_vals: list = []
        self._relations: list = []
        self._rhs: list = []

    @property
    def n_rows(self) -> int:
        return len(self._rhs)

    def set_bounds(self, lower=None, upper=None) -> None:
        if lower is not None:
            lo = np.broadcast_to(np.asarray(lower, dtype=float), (self.n_vars,))
            self.lower = lo.copy()
        if upper is not None:
            hi = np.broadcast_to(np.asarray(upper, dtype=float), (self.n_vars,))
            self.upper = hi.copy()
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("NaN bound")

    def add_row(self, cols, vals, relation: str, rhs: float) -> None:
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if cols.shape != vals.shape:
            raise ValueError("cols and vals length mismatch")
        if cols.size and (cols.min() < 0 or cols.max() >= self.n_vars):
            raise ValueError("column index out of range")
        if not np.all(np.isfinite(vals)) or not np.isfinite(rhs):
            raise ValueError("non-finite row coefficient or rhs")
        if relation not in _RELATIONS:
            raise ValueError(f"relation must be one of {_RELATIONS}, got {relation!r}")
        self._row_cols.append(cols)
        self._row_vals.append(vals)
        self._relations.append(relation)
        self._rhs.append(float(rhs))

    def rows(self):
        for cols, vals, rel, rhs in zip(self._row_cols, self._row_vals, self._relations, self._rhs):
            yield cols, vals, rel, rhs

    def rhs_vector(self) -> np.ndarray:
        return np.array(self._rhs, dtype=float)

    def relations(self) -> list:
        return list(self._relations)

    def matrix(self) -> sp.csr_matrix:
        """Constraint rows as an (n_rows, n_vars) CSR matrix."""
        if not self._rhs:
            return sp.csr_matrix((0, self.n_vars))
        rows = np.concatenate(
            [np.full(c.size, i, dtype=np.int64) for i, c in enumerate(self._row_cols)]
        ) if any(c.size for c in self._row_cols) else np.zeros(0, dtype=np.int64)
        cols = np.concatenate(self._row_cols) if self._row_cols else np.zeros(0, dtype=np.int64)
        vals = np.concatenate(self._row_vals) if self._row_vals else np.zeros(0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_rows, self.n_vars))


@dataclass
class LpSolution:
    """Solver output; primal/dual vectors are None unless status is OPTIMAL."""

    status: LpStatus
    primal: np.ndarray | None = None
    dual_rows: np.ndarray | None = None
    objective: float | None = None
    dual_objective: float | None = None
    iterations: int = 0
    message: str = ""


# ---------------------------------------------------------------------------
# standard form
# ---------------------------------------------------------------------------


class _StandardForm:
    """min c.x  s.t.  A x = b (b >= 0), x >= 0, built from an LpProblem."""

    def __init__(self, p: LpProblem):
        n = p.n_vars
        cmin = -p.objective if p.maximize else p.objective

        # variable transforms: x_orig = shift + sign * u  (or u - v when free)
        col_plus = np.empty(n, dtype=np.int64)
        col_minus = np.full(n, -1, dtype=np.int64)
        shift = np.zeros(n)
        sign = np.ones(n)
        bound_rows = []  # (var column, ub) rows u <= ub appended after true rows
        ncol = 0
        for j in range(n):
            lo, hi = p.lower[j], p.upper[j]
            if np.isneginf(lo) and np.isposinf(hi):
                col_plus[j] = ncol
                col_minus[j] = ncol + 1
                ncol += 2
            elif np.isneginf(lo):
                # x = hi - u
                col_plus[j] = ncol
                shift[j] = hi
                sign[j] = -1.0
                ncol += 1
            else:
                col_plus[j] = ncol
                shift[j] = lo
                if np.isposinf(hi):
                    pass
                else:
                    bound_rows.append((ncol, hi - lo))
                ncol += 1
        self.n_struct = ncol
        self.col_plus, self.col_minus = col_plus, col_minus
        self.shift, self.sign = shift, sign

        # structural cost vector
        c_struct = np.zeros(ncol)
        c_struct[col_plus] = sign * cmin
        has_minus = col_minus >= 0
        c_struct[col_minus[has_minus]] = -cmin[has_minus]
        self.const_shift = float(cmin @ shift)  # objective offset from shifts

        # assemble rows: originals first, then upper-bound rows
        m_orig = p.n_rows
        m = m_orig + len(bound_rows)
        coo_r: list = []
        coo_c: list = []
        coo_v: list = []
        b = np.zeros(m)
        row_sign = np.ones(m)
        slack_sign = np.zeros(m)  # 0: equality row, +1/-1: slack coefficient
        needs_slack = np.zeros(m, dtype=bool)

        for i, (cols, vals, rel, rhs) in enumerate(p.rows()):
            s = -1.0 if rel == ">=" else 1.0
            rhs_adj = s * (rhs - float(vals @ shift[cols]))
            cplus = col_plus[cols]
            vplus = s * vals * sign[cols]
            r_idx = [np.full(cols.size, i, dtype=np.int64)]
            c_idx = [cplus]
            v_idx = [vplus]
            fm = col_minus[cols] >= 0
            if fm.any():
                r_idx.append(np.full(int(fm.sum()), i, dtype=np.int64))
                c_idx.append(col_minus[cols[fm]])
                v_idx.append(-s * vals[fm])
            if rhs_adj < 0:
                rhs_adj = -rhs_adj
                v_idx = [-v for v in v_idx]
                row_sign[i] = -s
                sl = -1.0
            else:
                row_sign[i] = s
                sl = 1.0
            b[i] = rhs_adj
            coo_r.extend(r_idx)
            coo_c.extend(c_idx)
            coo_v.extend(v_idx)
            if rel != "==":
                needs_slack[i] = True
                slack_sign[i] = sl

        for t, (colu, ub) in enumerate(bound_rows):
            i = m_orig + t
            if ub < 0:
                raise ValueError("inconsistent bounds")
            b[i] = ub
            coo_r.append(np.array([i], dtype=np.int64))
            coo_c.append(np.array([colu], dtype=np.int64))
            coo_v.append(np.array([1.0]))
            needs_slack[i] = True
            slack_sign[i] = 1.0

        # append slack columns
        slack_col_of_row = np.full(m, -1, dtype=np.int64)
        for i in range(m):
            if needs_slack[i]:
                slack_col_of_row[i] = ncol
                coo_r.append(np.array([i], dtype=np.int64))
                coo_c.append(np.array([ncol], dtype=np.int64))
                coo_v.append(np.array([slack_sign[i]]))
                ncol += 1
        self.slack_col_of_row = slack_col_of_row
        self.slack_sign = slack_sign

        # artificial columns: one per row whose slack cannot start basic
        art_cols = np.full(m, -1, dtype=np.int64)
        basis = np.empty(m, dtype=np.int64)
        for i in range(m):
            if needs_slack[i] and slack_sign[i] > 0:
                basis[i] = slack_col_of_row[i]
            else:
                art_cols[i] = ncol
                basis[i] = ncol
                coo_r.append(np.array([i], dtype=np.int64))
                coo_c.append(np.array([ncol], dtype=np.int64))
                coo_v.append(np.array([1.0]))
                ncol += 1
        self.art_cols = art_cols
        self.n_total = ncol
        self.m = m
        self.m_orig = m_orig
        self.b = b
        self.row_sign = row_sign
        self.basis0 = basis

        if coo_r:
            rows_cat = np.concatenate(coo_r)
            cols_cat = np.concatenate(coo_c)
            vals_cat = np.concatenate(coo_v)
        else:
            rows_cat = cols_cat = np.zeros(0, dtype=np.int64)
            vals_cat = np.zeros(0)
        self.A = sp.csc_matrix((vals_cat, (rows_cat, cols_cat)), shape=(m, ncol))
        self.AT = self.A.T.tocsr()

        c_full = np.zeros(ncol)
        c_full[: self.n_struct] = c_struct
        self.c = c_full
        self.is_artificial = np.zeros(ncol, dtype=bool)
        self.is_artificial[art_cols[art_cols >= 0]] = True
        self.minimize_value_sign = -1.0 if p.maximize else 1.0

    def column(self, j: int):
        a = self.A
        lo, hi = a.indptr[j], a.indptr[j + 1]
        return a.indices[lo:hi], a.data[lo:hi]

    def recover_primal(self, x_std: np.ndarray) -> np.ndarray:
        x = self.shift + self.sign * x_std[self.col_plus]
        has_minus = self.col_minus >= 0
        x[has_minus] -= x_std[self.col_minus[has_minus]]
        return x

    def recover_duals(self, y_std: np.ndarray) -> np.ndarray:
        """Row multipliers of the original problem from standard-form duals."""
        y = y_std[: self.m_orig] * self.row_sign[: self.m_orig]
        return y * self.minimize_value_sign


# ---------------------------------------------------------------------------
# revised simplex
# ---------------------------------------------------------------------------


def _dantzig_order(d, neg):
    """Entering candidates, most negative reduced cost first.

    The full sort is deferred: nearly always the first candidate admits a
    pivot, and the rest are only needed to sidestep a numerical breakdown.
    """
    j0 = int(neg[np.argmin(d[neg])])
    yield j0
    rest = neg[neg != j0]
    for j in rest[np.argsort(d[rest], kind="stable")]:
        yield int(j)


class _Simplex:
    def __init__(self, sf: _StandardForm):
        self.sf = sf
        self.basis = sf.basis0.copy()
        self.in_basis = np.zeros(sf.n_total, dtype=bool)
        self.in_basis[self.basis] = True
        self.Binv = np.eye(sf.m)
        self.x_B = sf.b.copy()
        self.iterations = 0
        self.pivots_since_refactor = 0
        self.redundant_rows = np.zeros(sf.m, dtype=bool)

    def refactor(self) -> bool:
        B = self.sf.A[:, self.basis].toarray()
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        self.x_B = self.Binv @ self.sf.b
        np.maximum(self.x_B, 0.0, out=self.x_B)
        self.pivots_since_refactor = 0
        return True

    def _pivot(self, j: int, r: int, a_hat: np.ndarray) -> None:
        theta = self.x_B[r] / a_hat[r]
        self.x_B -= theta * a_hat
        self.x_B[r] = theta
        np.maximum(self.x_B, 0.0, out=self.x_B)
        pivrow = self.Binv[r] / a_hat[r]
        self.Binv -= np.outer(a_hat, pivrow)
        self.Binv[r] = pivrow
        self.in_basis[self.basis[r]] = False
        self.in_basis[j] = True
        self.basis[r] = j
        self.pivots_since_refactor += 1
        if self.pivots_since_refactor >= REFACTOR_PERIOD:
            self.refactor()

    def run_phase(self, c_phase: np.ndarray, enterable: np.ndarray, bland_after: int):
        """Minimize c_phase over the standard form; returns a status string."""
        sf = self.sf
        dtol = 1e-9 * (1.0 + float(np.abs(c_phase).max(initial=0.0)))
        while True:
            if self.iterations > MAX_ITERATIONS:
                return "failed: iteration limit"
            y = c_phase[self.basis] @ self.Binv
            d = c_phase - sf.AT @ y
            d[~enterable] = np.inf
            d[self.in_basis] = np.inf
            neg = np.flatnonzero(d < -dtol)
            if neg.size == 0:
                return "optimal"
            use_bland = self.iterations >= bland_after
            if use_bland:
                order = neg  # ascending column index: Bland's rule
            else:
                order = _dantzig_order(d, neg)  # most negative first, lazily sorted
            pivoted = False
            for j in order:
                j = int(j)
                idx, vals = sf.column(j)
                a_hat = self.Binv[:, idx] @ vals
                pos = a_hat > PIVOT_TOL
                if not pos.any():
                    if a_hat.max(initial=-np.inf) > 0.0:
                        continue  # only sub-threshold pivots in this column: try another
                    return "unbounded"
                ratios = np.full(sf.m, np.inf)
                ratios[pos] = self.x_B[pos] / a_hat[pos]
                theta = ratios.min()
                cand = np.flatnonzero(ratios <= theta + 1e-10)
                if use_bland:
                    r = int(cand[np.argmin(self.basis[cand])])
                else:
                    r = int(cand[np.argmax(a_hat[cand])])
                self._pivot(j, r, a_hat)
                self.iterations += 1
                pivoted = True
                break
            if not pivoted:
                return "failed: no admissible pivot above 1e-11"

    def drive_out_artificials(self) -> None:
        sf = self.sf
        for r in range(sf.m):
            if not sf.is_artificial[self.basis[r]]:
                continue
            row_vec = sf.AT @ self.Binv[r]
            row_vec[sf.is_artificial] = 0.0
            row_vec[self.in_basis] = 0.0
            j = int(np.argmax(np.abs(row_vec)))
            if abs(row_vec[j]) > 1e-9:
                idx, vals = sf.column(j)
                a_hat = self.Binv[:, idx] @ vals
                self._pivot(j, r, a_hat)
            else:
                self.redundant_rows[r] = True  # row is dependent; artificial stays at 0


def _solve_direct(p: LpProblem) -> LpSolution:
    sf = _StandardForm(p)
    sx = _Simplex(sf)
    bland_after = 5 * (sf.m + sf.n_total)

    has_artificials = (sf.art_cols >= 0).any()
    if has_artificials:
        c1 = np.zeros(sf.n_total)
        c1[sf.is_artificial] = 1.0
        enterable = ~sf.is_artificial
        status = sx.run_phase(c1, enterable, bland_after)
        if status.startswith("failed"):
            return LpSolution(LpStatus.FAILED, iterations=sx.iterations, message=status)
        if status == "unbounded":
            return LpSolution(
                LpStatus.FAILED, iterations=sx.iterations, message="phase-1 unbounded"
            )
        phase1_obj = float(c1[sx.basis] @ sx.x_B)
        if phase1_obj > FEAS_TOL * (1.0 + float(np.abs(sf.b).max(initial=0.0))):
            return LpSolution(LpStatus.INFEASIBLE, iterations=sx.iterations)
        sx.drive_out_artificials()

    enterable = ~sf.is_artificial
    status = sx.run_phase(sf.c, enterable, bland_after)
    if status.startswith("failed"):
        return LpSolution(LpStatus.FAILED, iterations=sx.iterations, message=status)
    if status == "unbounded":
        return LpSolution(LpStatus.UNBOUNDED, iterations=sx.iterations)

    x_std = np.zeros(sf.n_total)
    x_std[sx.basis] = sx.x_B
    primal = sf.recover_primal(x_std)
    y_std = sf.c[sx.basis] @ sx.Binv
    duals = sf.recover_duals(y_std)
    obj = float(p.objective @ primal)
    dual_obj = _dual_objective(p, duals)
    return LpSolution(
        LpStatus.OPTIMAL,
        primal=primal,
        dual_rows=duals,
        objective=obj,
        dual_objective=dual_obj,
        iterations=sx.iterations,
    )


# ---------------------------------------------------------------------------
# duals, checking, orientation swap
# ---------------------------------------------------------------------------


def _reduced_costs(p: LpProblem, y: np.ndarray) -> np.ndarray:
    return p.objective - p.matrix().T @ y


def _dual_objective(p: LpProblem, y: np.ndarray) -> float:
    """Dual objective evaluated from original data: y.b plus bound terms."""
    z = _reduced_costs(p, y)
    val = float(y @ p.rhs_vector())
    # bound terms: positive reduced costs bind at one bound, negative at the other
    pos_bound, neg_bound = (p.upper, p.lower) if p.maximize else (p.lower, p.upper)
    pos = (z > 0) & np.isfinite(pos_bound)
    neg = (z < 0) & np.isfinite(neg_bound)
    val += float(pos_bound[pos] @ z[pos]) + float(neg_bound[neg] @ z[neg])
    return val


def check_solution(p: LpProblem, sol: LpSolution) -> dict:
    """Residuals of an OPTIMAL solution: primal/dual feasibility and gap."""
    if sol.status is not LpStatus.OPTIMAL:
        raise ValueError("check_solution expects an optimal solution")
    x, y = sol.primal, sol.dual_rows
    A = p.matrix()
    ax = A @ x
    rhs = p.rhs_vector()
    viol = 0.0
    slack = ax - rhs
    for i, rel in enumerate(p.relations()):
        if rel == "<=":
            viol = max(viol, slack[i])
        elif rel == ">=":
            viol = max(viol, -slack[i])
        else:
            viol = max(viol, abs(slack[i]))
    viol = max(viol, float(np.max(p.lower - x, initial=0.0)))
    viol = max(viol, float(np.max(x - p.upper, initial=0.0)))

    z = _reduced_costs(p, y)
    scale = 1.0 + float(np.abs(p.objective).max(initial=0.0))
    dviol = 0.0
    at_lower = x <= p.lower + 1e-7
    at_upper = x >= p.upper - 1e-7
    for j in range(p.n_vars):
        zj = z[j] if not p.maximize else -z[j]
        # minimization convention: z_j >= 0 at lower bound, <= 0 at upper
        if at_lower[j] and at_upper[j]:
            continue
        if at_lower[j]:
            dviol = max(dviol, -zj)
        elif at_upper[j]:
            dviol = max(dviol, zj)
        else:
            dviol = max(dviol, abs(zj))
    # row multiplier signs and complementary slackness
    comp = 0.0
    for i, rel in enumerate(p.relations()):
        yi = y[i]
        comp = max(comp, abs(yi * slack[i]))
        s = -1.0 if p.maximize else 1.0
        if rel == "<=":
            dviol = max(dviol, s * yi)  # min: y <= 0 on <= rows; max: y >= 0
        elif rel == ">=":
            dviol = max(dviol, -s * yi)
    gap = abs(sol.objective - sol.dual_objective)
    return {
        "primal_infeasibility": float(viol),
        "dual_infeasibility": float(dviol / scale),
        "complementary_slackness": float(comp),
        "duality_gap": float(gap),
    }


def _swap_eligible(p: LpProblem) -> bool:
    if p.n_rows < SWAP_MIN_ROWS or p.n_rows < SWAP_ROW_FACTOR * p.n_vars:
        return False
    plain = (p.lower == 0) & np.isposinf(p.upper)
    free = np.isneginf(p.lower) & np.isposinf(p.upper)
    return bool(np.all(plain | free))


def _dual_problem(p: LpProblem):
    """LP dual of p (for variables bounded [0, inf) or free).

    Returns (dual LpProblem, target_sign) where the dual is posed so that each
    original row r corresponds to dual variable r (>= rows carry a flipped
    sign, recorded in row_flip) and each original variable j to dual row j.
    """
    # normalize to a max problem
    obj_sign = 1.0 if p.maximize else -1.0
    c = obj_sign * p.objective
    rel = p.relations()
    rhs = p.rhs_vector()
    m, n = p.n_rows, p.n_vars

    row_flip = np.array([-1.0 if r == ">=" else 1.0 for r in rel])
    dual = LpProblem(m, objective=row_flip * rhs, maximize=False)
    lower = np.zeros(m)
    for i, r in enumerate(rel):
        if r == "==":
            lower[i] = -np.inf
    dual.set_bounds(lower=lower)

    At = p.matrix().T.tocsr()  # (n_vars, n_rows)
    free = np.isneginf(p.lower)
    for j in range(n):
        lo, hi = At.indptr[j], At.indptr[j + 1]
        cols = At.indices[lo:hi]
        vals = At.data[lo:hi] * row_flip[cols]
        dual.add_row(cols, vals, "==" if free[j] else ">=", c[j])
    return dual, obj_sign, row_flip


def _solve_swapped(p: LpProblem) -> LpSolution:
    dual, obj_sign, row_flip = _dual_problem(p)
    dsol = _solve_direct(dual)
    if dsol.status is LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.INFEASIBLE, iterations=dsol.iterations)
    if dsol.status is LpStatus.INFEASIBLE:
        return LpSolution(
            LpStatus.FAILED,
            iterations=dsol.iterations,
            message="swapped orientation: dual infeasible (primal unbounded or infeasible)",
        )
    if dsol.status is not LpStatus.OPTIMAL:
        return LpSolution(dsol.status, iterations=dsol.iterations, message=dsol.message)

    primal = np.asarray(dsol.dual_rows)
    y = obj_sign * row_flip * dsol.primal
    obj = float(p.objective @ primal)
    return LpSolution(
        LpStatus.OPTIMAL,
        primal=primal,
        dual_rows=y,
        objective=obj,
        dual_objective=_dual_objective(p, y),
        iterations=dsol.iterations,
    )


def solve_lp(p: LpProblem, orientation: str = "auto") -> LpSolution:
    """Solve an LpProblem exactly.

    orientation: "auto" picks the swapped (dualized) solve for very tall
    problems; "direct"/"swap" force one path.  Solutions are deterministic for
    a fixed input.
    """
    if orientation not in ("auto", "direct", "swap"):
        raise ValueError(f"unknown orientation {orientation!r}")
    if orientation == "swap" or (orientation == "auto" and _swap_eligible(p)):
        return _solve_swapped(p)
    return _solve_direct(p)
