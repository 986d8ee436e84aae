"""Lattice-rule integration on permutation-invariant Korobov-type spaces."""

from .errors import (
    AssumptionViolated,
    DivergentSeries,
    NegativeSquareBeyondTolerance,
    ParameterDomain,
    PermQMCError,
    SearchSpaceTooLarge,
    TailToleranceExceeded,
    TooManyPermutations,
)
from .spaces import (
    DecayProfile,
    ErrorReport,
    InvarianceSpec,
    Profile,
    SpaceParams,
    Truncation,
    decay_sum,
    distinct_rearrangements,
    enumerate_nabla,
    multiplicity_factorial,
    n_r,
    weight_inv,
)
from .kernels import KernelValue, kernel_full, kernel_invariant, kernel_shift_invariant
from .bounds import (
    TractabilityConstants,
    alpha_star,
    c_d_lambda,
    c_d_lambda_bounds,
    eta_star,
    lemma_bound_sides,
    m1_full,
    m2_full,
    m2_invariant,
    rmse_lower_bound,
    s_d,
    theorem_upper_bound,
    tractability_constants,
    unshifted_lower_bound,
    v_star,
)
from .lattice import (
    Exhaustive,
    Lattice,
    Objective,
    RandomSample,
    SearchResult,
    Shift,
    average_over_z,
    character_average,
    dual_contains,
    rms_shifted,
    search,
    wce_shifted,
    wce_unshifted,
)
from .oracle import general_error_formula, m1_invariant_mc, wce_quadratic_form

__version__ = "0.1.0"
