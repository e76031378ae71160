"""
vhetnet - CoMP coverage engine for vertical heterogeneous networks of aerial
(ABS) and terrestrial (TBS) base stations.

Basic usage:
    from vhetnet import RngStream, association_scenario, assoc_prob_abs_analytic, coverage_analytic, table2_config

    cfg = table2_config("suburban")
    report = coverage_analytic(cfg, rng=RngStream(42))
    print(report.p_total, report.assoc.p_abs)

    assoc = assoc_prob_abs_analytic(association_scenario(30.0, "highrise"), rng=RngStream(42))
"""

__version__ = "0.1.0"

from .assoc import (
    AssociationResult,
    RegimeReport,
    assoc_prob_abs_analytic,
    assoc_prob_mc,
    classify_half_heights,
    regime_analysis,
)
from .cache import FitCache
from .channel import (
    FadingParams,
    link_state_probability,
    los_probability,
    los_profile,
    nakagami_power_cdf,
    path_loss_amplitude,
    sample_nakagami_amplitude,
    sample_power_gain,
)
from .coverage import (
    CoverageReport,
    CurveShape,
    coverage_analytic,
    coverage_analytic_sweep,
    coverage_sweep,
    curve_shape,
    laplace_interference,
    laplace_sqrt_interference,
    laplace_sqrt_moment,
    simulate_interference,
)
from .deploy import (
    ClusterState,
    WeightedSamples,
    classical_weighted_kmeans,
    compare_strategies,
    fading_aware_kmeans,
    fading_kernel,
    fading_objective,
    grid_search_single_center,
    make_grid,
    sir_gap_weights,
    weighted_kmeanspp,
)
from .dist import (
    OrderedDistances,
    joint_pdf_abs,
    joint_pdf_tbs,
    pdf_abs_first,
    pdf_abs_nth,
    pdf_tbs_first,
    pdf_tbs_nth,
    sample_ordered_abs,
    sample_ordered_tbs,
)
from .exceptions import (
    AcceptanceRateError,
    ConfigError,
    ConfigViolation,
    DegenerateFitError,
    DegenerateTriangulationError,
    DomainError,
    GeometryError,
    InsufficientTrialsError,
    NumericsError,
    OrderingError,
    QuadratureError,
    UndefinedEnvironmentError,
    VHetNetError,
)
from .model import (
    HIGHRISE,
    SUBURBAN,
    Environment,
    NetworkConfig,
    association_scenario,
    get_environment,
    load_config,
    table2_config,
    validate,
)
from .numerics import MonteCarloEstimate, QuadratureSpec, RngStream, integrate_1d, mc_expectation, reg_lower_gamma
from .outputs import ExperimentManifest, write_csv, write_json, write_pgm
from .sigstats import FitOptions, GammaFit, fit_gamma_U, fit_gamma_V, fit_table, select_cross_moment_variant
from .sim import Deployment, SirSample, empirical_coverage, empirical_coverage_sweep, sir_at_user, sir_map
from .triangulation import (
    PointLocation,
    Triangulation,
    comp_cluster_for_user,
    delaunay,
    empty_circumcircle_violations,
    locate,
    scan_locate,
)
from .types import LinkState, LinkStateVector, Method, Policy, SignalKind, Strategy, Tier

__all__ = [
    # Version
    "__version__",
    # Types
    "Tier",
    "LinkState",
    "LinkStateVector",
    "Method",
    "Policy",
    "Strategy",
    "SignalKind",
    # Exceptions
    "VHetNetError",
    "ConfigError",
    "ConfigViolation",
    "UndefinedEnvironmentError",
    "NumericsError",
    "DomainError",
    "QuadratureError",
    "InsufficientTrialsError",
    "OrderingError",
    "DegenerateFitError",
    "AcceptanceRateError",
    "GeometryError",
    "DegenerateTriangulationError",
    # Configuration
    "Environment",
    "SUBURBAN",
    "HIGHRISE",
    "NetworkConfig",
    "get_environment",
    "load_config",
    "validate",
    "table2_config",
    "association_scenario",
    # Numerics
    "RngStream",
    "QuadratureSpec",
    "MonteCarloEstimate",
    "integrate_1d",
    "mc_expectation",
    "reg_lower_gamma",
    # Channel
    "FadingParams",
    "los_probability",
    "los_profile",
    "link_state_probability",
    "path_loss_amplitude",
    "sample_power_gain",
    "sample_nakagami_amplitude",
    "nakagami_power_cdf",
    # Distance laws
    "OrderedDistances",
    "pdf_abs_nth",
    "pdf_abs_first",
    "pdf_tbs_nth",
    "pdf_tbs_first",
    "joint_pdf_abs",
    "joint_pdf_tbs",
    "sample_ordered_abs",
    "sample_ordered_tbs",
    # Signal statistics
    "FitOptions",
    "GammaFit",
    "FitCache",
    "fit_gamma_U",
    "fit_gamma_V",
    "fit_table",
    "select_cross_moment_variant",
    # Association
    "AssociationResult",
    "RegimeReport",
    "assoc_prob_abs_analytic",
    "assoc_prob_mc",
    "classify_half_heights",
    "regime_analysis",
    # Coverage
    "CoverageReport",
    "CurveShape",
    "coverage_analytic",
    "coverage_analytic_sweep",
    "coverage_sweep",
    "curve_shape",
    "laplace_interference",
    "laplace_sqrt_interference",
    "laplace_sqrt_moment",
    "simulate_interference",
    # Simulation
    "Deployment",
    "SirSample",
    "sir_at_user",
    "sir_map",
    "empirical_coverage",
    "empirical_coverage_sweep",
    # Deployment
    "WeightedSamples",
    "ClusterState",
    "fading_kernel",
    "fading_objective",
    "weighted_kmeanspp",
    "fading_aware_kmeans",
    "grid_search_single_center",
    "classical_weighted_kmeans",
    "make_grid",
    "sir_gap_weights",
    "compare_strategies",
    "Triangulation",
    "PointLocation",
    "delaunay",
    "locate",
    "comp_cluster_for_user",
    "empty_circumcircle_violations",
    "scan_locate",
    # Outputs
    "ExperimentManifest",
    "write_csv",
    "write_json",
    "write_pgm",
]

# Optional SQLAlchemy imports
try:
    from .models import Base, ExperimentRecord, GammaFitRecord
    from .repository import FitRepository

    __all__ += ["Base", "GammaFitRecord", "ExperimentRecord", "FitRepository"]
except ImportError:
    pass
