"""Numerical toolkit for Oseledets splittings and periodic-orbit statistics.

Estimates Lyapunov spectra and invariant splittings of smooth maps
(toral automorphisms, their perturbations, the Hénon family), certifies
pointwise nonuniform hyperbolicity over finite windows, locates
hyperbolic periodic orbits by close returns plus full-cycle Newton, and
checks how well cycle statistics approximate long-orbit statistics.

The cocycle inner loops run through a compiled extension when it built
at install time and fall back to a pure-NumPy implementation otherwise;
``oseledets_lab.BACKEND`` names the active one ("cython" or "python"),
and setting the ``OSELEDETS_LAB_BACKEND`` environment variable to
``cy`` or ``py`` forces a choice.
"""

from oseledets_lab._kernels import BACKEND
from oseledets_lab.cocycle import OrbitSegment, SplittingSample, FlagSample
from oseledets_lab.config import Horizons, RunConfig, bundled_config_path, parse_config
from oseledets_lab.errors import (
    ConvergenceError,
    DegeneracyError,
    DivergenceError,
    EstimationError,
    GroupingError,
    InputError,
)
from oseledets_lab.grassmann import (
    Frame,
    Subspace,
    direct_sum,
    gram_angle_matrix,
    independence_number,
    min_angle,
    subspace_distance,
    subspace_intersection,
)
from oseledets_lab.harness import (
    ApproximationReport,
    CoverageReport,
    GapReport,
    run_full_verification,
    verify_exponents,
    verify_independence,
    verify_mean_distance,
    verify_splitting_approx,
    weak_star_discrepancy,
)
from oseledets_lab.oseledets import (
    ExponentEstimate,
    FlagGrowthRates,
    MeasureStats,
    birkhoff_average,
    cluster_exponents,
    estimate_splitting,
    filtration_growth_check,
    lyapunov_qr,
    measure_stats,
    splitting_field,
    stats_from_samples,
)
from oseledets_lab.periodic import (
    PeriodicOrbit,
    SearchConfig,
    SearchResult,
    close_returns,
    cycle_splittings,
    eigensplit,
    newton_refine,
    orbit_stats,
    search_periodic,
)
from oseledets_lab.pesin import PesinParams, PesinReport, pesin_check, smallest_k
from oseledets_lab.systems import (
    SystemSpec,
    a3,
    cat2,
    henon,
    perturbed_toral,
    toral_automorphism,
    validate_hyperbolic,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    "ApproximationReport",
    "ConvergenceError",
    "CoverageReport",
    "DegeneracyError",
    "DivergenceError",
    "EstimationError",
    "ExponentEstimate",
    "FlagGrowthRates",
    "FlagSample",
    "Frame",
    "GapReport",
    "GroupingError",
    "Horizons",
    "InputError",
    "MeasureStats",
    "OrbitSegment",
    "PeriodicOrbit",
    "PesinParams",
    "PesinReport",
    "RunConfig",
    "SearchConfig",
    "SearchResult",
    "SplittingSample",
    "Subspace",
    "SystemSpec",
    "a3",
    "birkhoff_average",
    "bundled_config_path",
    "cat2",
    "close_returns",
    "cluster_exponents",
    "cycle_splittings",
    "direct_sum",
    "eigensplit",
    "estimate_splitting",
    "filtration_growth_check",
    "gram_angle_matrix",
    "henon",
    "independence_number",
    "lyapunov_qr",
    "measure_stats",
    "min_angle",
    "newton_refine",
    "orbit_stats",
    "parse_config",
    "perturbed_toral",
    "pesin_check",
    "run_full_verification",
    "search_periodic",
    "smallest_k",
    "splitting_field",
    "stats_from_samples",
    "subspace_distance",
    "subspace_intersection",
    "toral_automorphism",
    "validate_hyperbolic",
    "verify_exponents",
    "verify_independence",
    "verify_mean_distance",
    "verify_splitting_approx",
    "weak_star_discrepancy",
]
