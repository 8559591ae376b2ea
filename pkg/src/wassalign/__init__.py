"""Wasserstein alignment of discrete measures via a convex dual LP."""

from wassalign.measures import (
    CostSpec,
    CostTensor,
    DegenerateSupportError,
    DiscreteMeasure,
    FamilyEntry,
    TransformFamily,
    build_cost_tensor,
    igw_family,
    new_measure,
    pairwise_cost,
    pushforward,
    rotation_grid,
    stiefel_validate,
    whiten,
)
from wassalign.lp import LpProblem, LpSolution, LpSolverError, LpStatus, solve_lp
from wassalign.ot import (
    OtResult,
    PotentialPair,
    TransportPlan,
    c_transform,
    cbar_transform,
    wasserstein,
    wasserstein_1d,
)
from wassalign.alignment import (
    AlignmentDual,
    AlignmentReport,
    BruteForceResult,
    GapCertificate,
    RelaxedPrimal,
    ThetaExtraction,
    align,
    brute_force,
    compute_J_psi,
    extract_theta,
    gap_certificate,
    report_from_dual,
    solve_dual,
    solve_relaxed_primal,
)
from wassalign.euclidean import (
    CrossCorrelation,
    UpDownCheck,
    barycentric_map,
    cross_correlation,
    updown_check,
)
from wassalign.normal import (
    MixtureModel,
    NormalSampler,
    mixture_F,
    mixture_brenier,
    mixture_demo,
    std_normal_cdf,
    std_normal_inv_cdf,
)

__version__ = "0.1.0"
