"""Toric quantization lab: Kähler geodesics on CP^1 versus geodesics of Hermitian norms."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    ContractError,
    NumericalFailure,
    OverflowRisk,
    PositivityError,
    PreconditionError,
)
from .measures import ProbabilityMeasure, ks_distance, moment, wasserstein1
from .toric import (
    KaehlerPotential,
    MAGeodesicToric,
    SymplecticPotential,
    aubin_yau_energy,
    geodesic_residual,
    legendre_transform,
    limit_measure,
    ma_potential_at,
    moment_map,
    pushforward_at_t,
    velocity,
)
from .sections import (
    ADJOINT,
    HILB,
    AngularPerturbation,
    Bridge,
    GramMatrix,
    Quadrature,
    SectionSpace,
    Weight,
    bridge_weight,
    certify_bridge,
    endpoint_weight,
    gram_matrix,
    weight_at_t,
)
from .geodesics import (
    GeodesicSpectrum,
    evaluate_Ht,
    geodesic_distance,
    psd_margin,
    sandwich_check,
    solve_geodesic,
    spectral_measure,
    z_functional,
)
from .toeplitz import (
    ToeplitzOperator,
    composition_defect,
    derivative_toeplitz,
    perturbation_shift,
    toeplitz_operator,
    toeplitz_spectral_measure,
    trace_defect,
)
from .bergman import BergmanEvaluation, bergman_from_gram, bergman_kernel_log, fs_metric, sup_deviation

__all__ = [
    "__version__",
    "ConfigError",
    "ContractError",
    "NumericalFailure",
    "OverflowRisk",
    "PositivityError",
    "PreconditionError",
    "ProbabilityMeasure",
    "ks_distance",
    "moment",
    "wasserstein1",
    "KaehlerPotential",
    "MAGeodesicToric",
    "SymplecticPotential",
    "aubin_yau_energy",
    "geodesic_residual",
    "legendre_transform",
    "limit_measure",
    "ma_potential_at",
    "moment_map",
    "pushforward_at_t",
    "velocity",
    "ADJOINT",
    "HILB",
    "AngularPerturbation",
    "Bridge",
    "GramMatrix",
    "Quadrature",
    "SectionSpace",
    "Weight",
    "bridge_weight",
    "certify_bridge",
    "endpoint_weight",
    "gram_matrix",
    "weight_at_t",
    "GeodesicSpectrum",
    "evaluate_Ht",
    "geodesic_distance",
    "psd_margin",
    "sandwich_check",
    "solve_geodesic",
    "spectral_measure",
    "z_functional",
    "ToeplitzOperator",
    "composition_defect",
    "derivative_toeplitz",
    "perturbation_shift",
    "toeplitz_operator",
    "toeplitz_spectral_measure",
    "trace_defect",
    "BergmanEvaluation",
    "bergman_from_gram",
    "bergman_kernel_log",
    "fs_metric",
    "sup_deviation",
]
