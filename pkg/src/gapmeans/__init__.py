"""Lacunary series with prescribed integral means.

Given any log-convex weight w on [0,1), gapmeans constructs a Hadamard
gap series f with M_p(f, r) within fixed multiplicative constants of
w(r) for every 0 < p <= inf, and evaluates/certifies sphere, volume, and
radially weighted integral means of such series.  All magnitudes are
handled in the log domain; weights up to exp(2^40) are in scope.
"""

from .envelope import (
    EXPONENT_CAP,
    NewtonEnvelope,
    SupportLine,
    build_envelope,
    envelope_eval,
    envelope_csv_text,
    envelope_to_csv,
    support_coefficient,
)
from .errors import (
    AccuracyError,
    ConstructionError,
    ConvexityError,
    DegenerateInputError,
    GapmeansError,
    InconsistentInputsError,
    InputError,
    MonotonicityError,
    ParameterError,
    RangeError,
    ResolutionError,
)
from .grids import Radius, as_radius, dyadic_grid, merge_grids
from .lacunary import (
    DominanceCert,
    GapSeries,
    certificate_grid,
    certify_dominance,
    select_gap_terms,
    split_even_odd,
    theorem1_series,
)
from .means import (
    IntervalValue,
    MeansProfile,
    RadialFactor,
    circle_log_abs,
    inverse_smoothing_transform,
    m2_exact,
    m2_squared_coeffs,
    measure_concentration_check,
    minf_bounds,
    mp_interval,
    mp_lower_bound_holder,
    mp_sampled,
    parity_min_log,
    sphere_profile,
    volume_mean,
    volume_profile,
    volume_smoothing_transform,
    weighted_volume_mean,
    weighted_volume_profile,
)
from .multidim import (
    BallSeries,
    HomPoly,
    RWCertificate,
    l2_norm_sphere,
    m2_exact_ball,
    mp_sphere_sampled,
    random_rw_poly,
    sup_norm_sphere,
    theorem1_series_ball,
)
from .verify import (
    EquivalenceReport,
    alpha_weighted_demo,
    concentration_report,
    corollary_means_verify,
    corollary_volume_verify,
    lemma_certificates,
    polar_algebra_check,
    proposition_pipeline,
    theorem1_verify,
)
from .weights import (
    ConvexityReport,
    LogWeight,
    check_log_convexity,
    make_constant_weight,
    make_exp_weight,
    make_log_weight,
    make_power_weight,
    parse_weight_spec,
    weight_from_csv,
    weight_from_samples,
    weight_from_series,
    weight_power,
    weight_product,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
