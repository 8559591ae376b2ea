"""Built-in property suite: every module invariant on seeded random instances.

Each check returns (ok, detail); run_all executes the registry in order and
is the engine behind the `validate` CLI command.  Sizes are desk-scale so the
whole suite completes in well under five minutes.
"""

from __future__ import annotations

import numpy as np

from wassalign.alignment import (
    brute_force,
    compute_J_psi,
    extract_theta,
    gap_certificate,
    solve_dual,
    solve_relaxed_primal,
)
from wassalign.euclidean import cross_correlation, updown_check
from wassalign.lp import LpProblem, LpStatus, check_solution, solve_lp
from wassalign.measures import (
    CostSpec,
    CostTensor,
    FamilyEntry,
    build_cost_tensor,
    new_measure,
    pairwise_cost,
    pushforward,
    rotation_grid,
    stiefel_validate,
    whiten,
)
from wassalign.normal import (
    mixture_F,
    mixture_brenier,
    mixture_demo,
    std_normal_cdf,
    std_normal_inv_cdf,
)
from wassalign.ot import TransportPlan, c_transform, cbar_transform, wasserstein

__all__ = ["run_all", "CHECKS"]

DEFAULT_SEED = 20240917


def _random_instance(rng, N, M, l):
    values = rng.uniform(0.0, 10.0, size=(N, M, l))
    R = rng.uniform(0.0, 1.0, size=l)
    mu = new_measure(rng.normal(size=(N, 2)), weights=rng.dirichlet(np.ones(N)))
    nu = new_measure(rng.normal(size=(M, 2)), weights=rng.dirichlet(np.ones(M)))
    return mu, nu, CostTensor(values, R)


def _random_stiefel(rng, n, d):
    A, _ = np.linalg.qr(rng.normal(size=(n, d)))
    return A[:, :d]


def check_whitening(rng):
    worst = 0.0
    for dim in (1, 2, 3):
        m = new_measure(rng.normal(size=(4 * dim + 3, dim)) @ rng.normal(size=(dim, dim)))
        w = whiten(m)
        worst = max(worst, float(np.max(np.abs(w.mean()))))
        worst = max(worst, float(np.max(np.abs(w.covariance() - np.eye(dim)))))
    return worst <= 1e-10, f"max deviation {worst:.2e}"


def check_pushforward_mass(rng):
    m = new_measure(rng.normal(size=(7, 2)), weights=rng.dirichlet(np.ones(7)))
    e = FamilyEntry("m", rng.normal(size=(3, 2)), rng.normal(size=3))
    out = pushforward(m, e)
    exact = out.weights.sum() == m.weights.sum()
    return exact, "total mass preserved exactly"


def check_cost_kinds(rng):
    Y, Z = rng.normal(size=(6, 2)), rng.normal(size=(5, 2))
    sym = np.max(
        np.abs(
            pairwise_cost(Y, Z, CostSpec.squared_euclidean())
            - pairwise_cost(Z, Y, CostSpec.squared_euclidean()).T
        )
    )
    pw = np.max(
        np.abs(
            pairwise_cost(Y, Z, CostSpec.power(2.0))
            - pairwise_cost(Y, Z, CostSpec.squared_euclidean())
        )
    )
    return sym <= 1e-12 and pw <= 1e-12, f"symmetry {sym:.2e}, power-2 match {pw:.2e}"


def check_rotation_grid(rng):
    fam = rotation_grid(9)
    ok = all(stiefel_validate(e.matrix) for e in fam)
    dets = max(abs(np.linalg.det(e.matrix) - 1.0) for e in fam)
    return ok and dets <= 1e-12, f"9 rotations, det deviation {dets:.2e}"


def check_lp_duality(rng):
    worst = 0.0
    for _ in range(6):
        n = int(rng.integers(3, 6))
        p = LpProblem(n, objective=rng.normal(size=n), maximize=bool(rng.integers(2)))
        p.set_bounds(lower=0.0, upper=6.0)
        for _ in range(int(rng.integers(3, 7))):
            p.add_row(np.arange(n), rng.normal(size=n), "<=", float(rng.uniform(0.5, 3.0)))
        sol = solve_lp(p)
        if sol.status is not LpStatus.OPTIMAL:
            continue
        res = check_solution(p, sol)
        worst = max(worst, res["duality_gap"] / (1.0 + abs(sol.objective)),
                    res["complementary_slackness"])
    return worst <= 1e-7, f"worst residual {worst:.2e}"


def check_lp_scaling(rng):
    n = 4
    c = rng.normal(size=n)
    rows = [(rng.normal(size=n), float(rng.uniform(0.5, 3.0))) for _ in range(6)]

    def solve(scale):
        p = LpProblem(n, objective=scale * c, maximize=True)
        p.set_bounds(lower=0.0, upper=5.0)
        for a, b in rows:
            p.add_row(np.arange(n), a, "<=", b)
        return solve_lp(p)

    s1, s2 = solve(1.0), solve(2.0)
    same = np.array_equal(s1.primal, s2.primal)
    return same, "primal point invariant under objective scaling by 2"


def check_ot_duality(rng):
    worst = 0.0
    for _ in range(5):
        N, M = int(rng.integers(3, 9)), int(rng.integers(3, 9))
        p = rng.dirichlet(np.ones(N))
        q = rng.dirichlet(np.ones(M))
        C = rng.uniform(0, 10, size=(N, M))
        res = wasserstein(p, q, C)
        res.plan.check_marginals(p, q)
        worst = max(worst, abs(res.potentials.objective(p, q) - res.value))
        worst = max(worst, res.potentials.feasibility_violation(C))
        psi = rng.normal(size=M)
        weak = cbar_transform(psi, C) @ p + psi @ q - res.value
        worst = max(worst, weak)
    return worst <= 1e-7, f"worst residual {worst:.2e}"


def check_transform_idempotence(rng):
    worst = 0.0
    for _ in range(10):
        C = rng.uniform(-5, 5, size=(6, 6))
        psi = rng.normal(size=6)
        phi = cbar_transform(psi, C)
        worst = max(worst, float(np.max(np.abs(cbar_transform(c_transform(phi, C), C) - phi))))
    return worst <= 1e-12, f"worst deviation {worst:.2e}"


def check_triangle_inequality(rng):
    spec = CostSpec.squared_euclidean()
    pts = [rng.normal(size=(n, 2)) for n in (5, 6, 7)]
    ws = [np.full(n, 1.0 / n) for n in (5, 6, 7)]

    def w2(i, j):
        return np.sqrt(wasserstein(ws[i], ws[j], pairwise_cost(pts[i], pts[j], spec)).value)

    slack = w2(0, 2) - w2(0, 1) - w2(1, 2)
    return slack <= 1e-7, f"triangle slack {slack:.2e}"


def check_stability_bound(rng):
    spec = CostSpec.squared_euclidean()
    worst = -np.inf
    for _ in range(4):
        mu = whiten(new_measure(rng.normal(size=(8, 3))))
        mu2 = whiten(new_measure(rng.normal(size=(7, 3))))
        nu = new_measure(rng.normal(size=(6, 2)))
        nu2 = new_measure(rng.normal(size=(5, 2)))
        A, A2 = _random_stiefel(rng, 3, 2), _random_stiefel(rng, 3, 2)

        def w2(Y, wy, Z, wz):
            return np.sqrt(wasserstein(wy, wz, pairwise_cost(Y, Z, spec)).value)

        lhs = abs(
            w2(mu.points @ A, mu.weights, nu.points, nu.weights)
            - w2(mu2.points @ A2, mu2.weights, nu2.points, nu2.weights)
        )
        rhs = (
            np.sqrt(mu.second_moment()) * np.linalg.norm(A - A2)
            + w2(mu.points, mu.weights, mu2.points, mu2.weights)
            + w2(nu.points, nu.weights, nu2.points, nu2.weights)
        )
        worst = max(worst, lhs - rhs)
    return worst <= 1e-7, f"worst bound slack {worst:.2e}"


def check_alignment_agreement(rng):
    worst = 0.0
    for _ in range(3):
        mu, nu, ct = _random_instance(rng, int(rng.integers(4, 8)), int(rng.integers(4, 8)), int(rng.integers(2, 5)))
        dual = solve_dual(mu, nu, ct)
        bf = brute_force(mu, nu, ct)
        rp = solve_relaxed_primal(mu, nu, ct)
        worst = max(worst, abs(dual.value - bf.value), abs(rp.value - bf.value))
    return worst <= 1e-7, f"worst disagreement {worst:.2e}"


def check_argmin_extraction(rng):
    ok = True
    for _ in range(3):
        mu, nu, ct = _random_instance(rng, 6, 6, 4)
        dual = solve_dual(mu, nu, ct)
        extraction = extract_theta(dual, ct, mu.weights)
        bf = brute_force(mu, nu, ct)
        ok = ok and bool(set(extraction.k_star) & set(bf.k_star))
        ok = ok and extraction.witness_k is not None
    return ok, "argmin intersection and slack witness"


def check_shift_equivariance(rng):
    mu, nu, ct = _random_instance(rng, 5, 6, 3)
    s = 1.5
    d0 = solve_dual(mu, nu, ct)
    d1 = solve_dual(mu, nu, CostTensor(ct.values + s, ct.penalties))
    dev = abs(d1.value - (d0.value + s))
    return dev <= 1e-8, f"value shift deviation {dev:.2e}"


def check_psi_shift_invariance(rng):
    mu, nu, ct = _random_instance(rng, 5, 5, 3)
    dual = solve_dual(mu, nu, ct)
    s = 0.7
    obj = mu.weights @ (dual.xi[:, 0] - s) + (dual.psi[:, 0] + s) @ nu.weights
    dev = abs(obj - dual.value)
    return dev <= 1e-9, f"objective deviation {dev:.2e}"


def check_gap_identity(rng):
    worst = 0.0
    for _ in range(3):
        mu, nu, ct = _random_instance(rng, 5, 6, 4)
        dual = solve_dual(mu, nu, ct)
        for k0 in rng.integers(0, 4, size=3):
            cert = gap_certificate(int(k0), mu, nu, ct, dual.value)
            worst = max(worst, cert.identity_residual, -cert.delta, -cert.g)
    return worst <= 1e-6, f"worst residual {worst:.2e}"


def check_continuity_in_data(rng):
    spec = CostSpec.squared_euclidean()
    mu = whiten(new_measure(rng.normal(size=(7, 2))))
    nu = new_measure(rng.normal(size=(6, 2)))
    fam = rotation_grid(4)
    v0 = solve_dual(mu, nu, build_cost_tensor(mu, nu, fam, spec)).value
    worst = -np.inf
    for eps in (1e-3, 1e-2):
        bump = rng.uniform(-eps, eps, size=mu.points.shape)
        mu2 = new_measure(mu.points + bump, weights=mu.weights)
        v1 = solve_dual(mu2, nu, build_cost_tensor(mu2, nu, fam, spec)).value
        delta = eps * np.sqrt(mu.dim)
        bound = 2.0 * np.sqrt(max(v0, v1)) * delta + delta**2
        worst = max(worst, abs(v1 - v0) - bound)
    return worst <= 1e-7, f"worst bound slack {worst:.2e}"


def check_updown_constant(rng):
    worst = 0.0
    for _ in range(3):
        mu = whiten(new_measure(rng.normal(size=(8, 3))))
        nu = whiten(new_measure(rng.normal(size=(6, 2))))
        A = _random_stiefel(rng, 3, 2)
        worst = max(worst, updown_check(mu, nu, A).residual)
        C = pairwise_cost(mu.points @ A, nu.points, CostSpec.squared_euclidean())
        res = wasserstein(mu.weights, nu.weights, C)
        worst = max(worst, updown_check(mu, nu, A, gamma=res.plan).residual)
    return worst <= 1e-9, f"worst residual {worst:.2e}"


def check_J_psi_lift(rng):
    mu, nu, ct = _random_instance(rng, 5, 6, 3)
    folded = ct.folded()
    worst = 0.0
    for _ in range(3):
        psi = rng.normal(size=nu.size)
        J = compute_J_psi(psi, ct, mu.weights)
        for k in range(ct.shape[2]):
            worst = max(worst, float((J[:, k][:, None] + psi[None, :] - folded[:, :, k]).max()))
        means = mu.weights @ J
        worst = max(worst, float(np.max(np.abs(means - means[0]))))
    return worst <= 1e-10, f"worst deviation {worst:.2e}"


def check_cross_correlation_cases(rng):
    nu1 = new_measure(rng.normal(size=(5, 1)))
    plan1 = TransportPlan(np.outer(np.full(4, 0.25), nu1.weights))
    d1 = cross_correlation(plan1, nu1, rng.normal(size=(4, 1))).defect
    nu2 = new_measure(rng.normal(size=(6, 2)))
    plan2 = TransportPlan(np.diag(nu2.weights))
    d2 = cross_correlation(plan2, nu2, nu2.points).defect
    return d1 == 0.0 and d2 <= 1e-12, f"defects {d1:.1e}, {d2:.1e}"


def check_normal_cdf(rng):
    worst = 0.0
    for t in np.linspace(-7, 7, 401):
        worst = max(worst, abs(std_normal_cdf(float(t)) + std_normal_cdf(float(-t)) - 1.0))
    roundtrip = max(
        abs(std_normal_cdf(std_normal_inv_cdf(float(u))) - float(u))
        for u in np.linspace(1e-6, 1 - 1e-6, 201)
    )
    return worst <= 1e-12 and roundtrip <= 1e-9, (
        f"symmetry {worst:.2e}, round-trip {roundtrip:.2e}"
    )


def check_mixture_F(rng):
    grid = np.linspace(-8, 8, 801)
    f0 = max(abs(mixture_F(0.0, float(t))) for t in grid)
    mono = min(
        np.min(np.diff([mixture_brenier(c, float(t)) for t in grid])) for c in (0.5, 1.0, 2.0)
    )
    fmono = min(np.min(np.diff([mixture_F(1.0, float(t)) for t in grid])), 1.0)
    return f0 <= 1e-9 and mono > 0 and fmono > 0, (
        f"|F_0| {f0:.1e}, map slope {mono:.2e}, F slope {fmono:.2e}"
    )


def check_mixture_demo_coarse(rng):
    rep = mixture_demo((1.0, 0.0), n_samples=400, seed=11, grid_size=16)
    angle = float(rep.theta_star_label.split("=")[1])
    dist = min(abs(angle - np.pi / 2), abs(angle - 3 * np.pi / 2))
    ok = dist <= 2 * np.pi / 16 + 1e-9 and rep.value <= 0.1
    return ok, f"angle offset {dist:.3f}, value {rep.value:.4f}"


CHECKS = [
    ("whitening postcondition", check_whitening),
    ("pushforward mass", check_pushforward_mass),
    ("cost kinds", check_cost_kinds),
    ("rotation grid orthogonality", check_rotation_grid),
    ("lp strong duality + slackness", check_lp_duality),
    ("lp objective scaling", check_lp_scaling),
    ("ot duality + marginals", check_ot_duality),
    ("cbar/c transform idempotence", check_transform_idempotence),
    ("w2 triangle inequality", check_triangle_inequality),
    ("projection stability bound", check_stability_bound),
    ("dual = brute = relaxed", check_alignment_agreement),
    ("argmin extraction + witness", check_argmin_extraction),
    ("objective shift equivariance", check_shift_equivariance),
    ("psi shift invariance", check_psi_shift_invariance),
    ("gap identity", check_gap_identity),
    ("continuity in data", check_continuity_in_data),
    ("up/down constant (n - d)", check_updown_constant),
    ("J-psi lift feasibility", check_J_psi_lift),
    ("cross-correlation special cases", check_cross_correlation_cases),
    ("normal cdf/inverse bounds", check_normal_cdf),
    ("mixture map monotonicity", check_mixture_F),
    ("mixture demo (coarse)", check_mixture_demo_coarse),
]


def run_all(seed: int = DEFAULT_SEED, out=None):
    """Run every check; returns the list of (name, ok, detail)."""
    results = []
    rng = np.random.default_rng(seed)
    for name, fn in CHECKS:
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # a crash counts as a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
        if out is not None:
            out.write(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}\n")
    return results
