"""Numerical laboratory for empirical measures of cone- and surface-distributed
points on scaled l^p spheres: exact samplers, rate functionals, constrained
maximum-entropy solves, and rare-event Monte Carlo."""

__version__ = "0.1.0"

from .analytic import (
    ExpFamily,
    GeneralizedGaussian,
    Mixture,
    RegimeThresholds,
    ScaledGeneralizedGaussian,
    UniformSymmetric,
    cdf_mu_p,
    entropy_closed_form,
    moment_mu_p,
    moment_mu_q_beta,
    mu_p,
    mu_q_beta,
    quantile_mu_p,
    rate_offset,
    thresholds,
)
from .entropy_rate import RateValue, entropy_estimate, rate_Hp, rate_J
from .maxent import (
    MaxEntInfeasibleError,
    MaxEntSolution,
    MaxEntUnboundedError,
    PowerTerm,
    Regime,
    solve_maxent_general,
    solve_nu_star,
)
from .measures import (
    EmpiricalMeasure,
    Interval,
    empirical_from_sphere,
    ks_distance,
    moment,
    scale_map_G,
    wasserstein_q,
)
from .rare_event import (
    ConditionalChainConfig,
    ConditioningError,
    RareEventEstimate,
    estimate_rare_prob,
    pbm_marginals,
    sample_conditional,
    wls_rate_slope,
)
from .sampling import (
    RngStream,
    SpherePoint,
    SurfaceWeightStats,
    sample_cone,
    sample_cone_batch,
    sample_gen_gaussian,
    sample_surface,
)

__all__ = [name for name in dir() if not name.startswith("_")]
