"""Multilevel (quasi-)Monte Carlo for elliptic problems with lognormal
random coefficients, built around a full-multigrid solver whose converged
next-to-finest iterate doubles as the multilevel coarse sample."""

from .errors import (
    ConfigError,
    InsufficientDataError,
    MaxLevelExceededError,
    SolverDivergenceError,
    UnsupportedDimensionError,
    UnsupportedParameterError,
)
from .estimators import (
    DriverConfig,
    EstimatorResult,
    LevelRecord,
    QmcVarianceFit,
    RateEstimates,
    Regime,
    estimate_rates,
    level_estimator_mean,
    mlmc_run,
    mlqmc_run,
    optimal_allocation,
    qmc_variance_test,
    regime,
    weak_error_estimate,
)
from .experiment import (
    FIELD_PARAMS,
    RunConfig,
    case_problem,
    compare_methods,
    parse_config,
    run_experiment,
    serialize_config,
)
from .grid import (
    DiscreteSystem,
    EastBoundaryFlux,
    GridSpec,
    PointValue,
    ProblemSpec,
    assemble_system,
    evaluate_qoi,
    face_transmissibility,
    grid_for_level,
    qoi_east_flux,
    qoi_point_value,
)
from .multigrid import (
    FmgResult,
    MgHierarchy,
    build_hierarchy,
    fmg_solve,
    prolong,
    restrict,
    smooth,
    v_cycle,
)
from .pde import BasisCache, PdePairSampler, PdeSetup, fmg_mlmc_run
from .random_field import (
    CoefficientField,
    KLBasis,
    MaternParams,
    build_kl_basis,
    coarsen_field,
    constant_field,
    injected_points,
    kl_basis_at_points,
    load_kl_basis,
    matern_covariance,
    sample_log_field,
    save_kl_basis,
)
from .sampler import (
    LATTICE_SHIFTED,
    PSEUDO_RANDOM,
    SOBOL_SCRAMBLED,
    QmcPointSet,
    SampleStream,
    lattice_points,
    pseudo_random_normals,
    randomized_qmc_mean,
    sobol_points,
    to_normals,
)

__version__ = "0.1.0"
