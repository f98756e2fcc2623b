"""Bayesian multivariate regression with scale-mixture-of-normal errors.

Two data-augmentation Gibbs samplers (conjugate normal-inverse-Wishart prior,
and a flat scale prior with Student-t errors) together with the drift and
minorization machinery that certifies their geometric / uniform ergodicity
numerically.
"""

from .diagnostics import GewekeResult, SummaryTable, ess, ess_detail, geweke_joint_test, summarize
from .ergodicity import (
    ConditionReport,
    DriftConstants,
    EnergyBasis,
    MinorizationBound,
    build_energy_basis,
    check_improper_condition,
    check_proper_geometric,
    check_uniform,
    cond_mean_energy_improper,
    cond_mean_energy_proper,
    drift_coefficient_improper,
    drift_constants_proper,
    energy_proper,
    energy_quadratic,
    energy_weighted,
    minorization_lower_bound,
)
from .errors import (
    InvalidParameterError,
    NumericalError,
    QuadratureError,
    RankDeficiencyError,
    SamplingError,
    SmnregError,
)
from .gibbs import (
    ImproperModel,
    ProperModel,
    Trace,
    run_chain,
    step_improper,
    step_proper,
    write_trace_csv,
    write_trace_meta,
)
from .matvar import (
    InverseWishartParams,
    MatrixNormalParams,
    invwishart_logpdf,
    matnorm_logpdf,
    sample_inverse_wishart,
    sample_matrix_normal,
    sample_matrix_normal_inverse_wishart,
)
from .mixing import GammaMixing, MixingDensity, MomentValue, PointMass, TabulatedMixing
from .model import (
    ChainState,
    Dataset,
    NIWPrior,
    PosteriorUpdate,
    compute_update,
    mahalanobis_residuals,
    psi_identity_residual,
    simulate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "ChainState",
    "ConditionReport",
    "Dataset",
    "DriftConstants",
    "EnergyBasis",
    "GammaMixing",
    "GewekeResult",
    "ImproperModel",
    "InvalidParameterError",
    "InverseWishartParams",
    "MatrixNormalParams",
    "MinorizationBound",
    "MixingDensity",
    "MomentValue",
    "NIWPrior",
    "NumericalError",
    "PointMass",
    "PosteriorUpdate",
    "ProperModel",
    "QuadratureError",
    "RankDeficiencyError",
    "SamplingError",
    "SmnregError",
    "SummaryTable",
    "TabulatedMixing",
    "Trace",
    "build_energy_basis",
    "check_improper_condition",
    "check_proper_geometric",
    "check_uniform",
    "compute_update",
    "cond_mean_energy_improper",
    "cond_mean_energy_proper",
    "drift_coefficient_improper",
    "drift_constants_proper",
    "energy_proper",
    "energy_quadratic",
    "energy_weighted",
    "ess",
    "ess_detail",
    "geweke_joint_test",
    "invwishart_logpdf",
    "mahalanobis_residuals",
    "matnorm_logpdf",
    "minorization_lower_bound",
    "psi_identity_residual",
    "run_chain",
    "sample_inverse_wishart",
    "sample_matrix_normal",
    "sample_matrix_normal_inverse_wishart",
    "simulate_dataset",
    "step_improper",
    "step_proper",
    "summarize",
    "write_trace_csv",
    "write_trace_meta",
]
