"""Output-feedback boundary stabilization of 1-D reaction-diffusion plants
with input delay: spectral reduction, finite-dimensional observer and
predictor synthesis, constructive stability certificates, and closed-loop
simulation.
"""

from .certification import (
    Certificate,
    CertificateMargins,
    ClosedLoopMatrices,
    SearchBudget,
    assemble,
    check_certificate,
    constructive_candidate,
    find_minimal_N,
    p_norm_scan,
    solve_p,
)
from .coeffs import Coefficient
from .config import FAMILY_BY_THEOREM, THEOREM_BY_FAMILY, JobConfig
from .errors import (
    BlowupDetected,
    ConfigError,
    DegenerateSpectrum,
    DimensionError,
    DivergenceGuard,
    IllConditioned,
    InvalidPlant,
    LyapunovFailure,
    MissingArtifact,
    MissingHistory,
    NonPositiveData,
    NotFeasibleWithinBudget,
    RdstabError,
    ResolutionError,
    SpectrumTooShort,
)
from .simulator import Trajectory, fit_decay_rate, lyapunov_diagnostic, simulate
from .spectral import (
    CertificateKind,
    Measurement,
    PlantSpec,
    ReactionSplit,
    SpectralData,
    analyze_plant,
    compute_spectrum,
    eigensolve_on_grid,
    identity_residuals,
    measurement_traces,
    project_sources,
    residual_norms,
    split_reaction,
    tail_constant,
)
from .synthesis import (
    GainSet,
    KalmanReport,
    default_targets,
    design_gains,
    gainset_from_arrays,
    kalman_check,
    place_poles,
    select_n0,
)

__version__ = "0.1.0"

__all__ = [
    "BlowupDetected",
    "Certificate",
    "CertificateKind",
    "CertificateMargins",
    "ClosedLoopMatrices",
    "Coefficient",
    "ConfigError",
    "DegenerateSpectrum",
    "DimensionError",
    "DivergenceGuard",
    "FAMILY_BY_THEOREM",
    "GainSet",
    "IllConditioned",
    "InvalidPlant",
    "JobConfig",
    "KalmanReport",
    "LyapunovFailure",
    "Measurement",
    "MissingArtifact",
    "MissingHistory",
    "NonPositiveData",
    "NotFeasibleWithinBudget",
    "PlantSpec",
    "RdstabError",
    "ReactionSplit",
    "ResolutionError",
    "SearchBudget",
    "SpectralData",
    "SpectrumTooShort",
    "THEOREM_BY_FAMILY",
    "Trajectory",
    "analyze_plant",
    "assemble",
    "check_certificate",
    "compute_spectrum",
    "constructive_candidate",
    "default_targets",
    "design_gains",
    "eigensolve_on_grid",
    "find_minimal_N",
    "fit_decay_rate",
    "gainset_from_arrays",
    "identity_residuals",
    "kalman_check",
    "lyapunov_diagnostic",
    "measurement_traces",
    "p_norm_scan",
    "place_poles",
    "project_sources",
    "residual_norms",
    "select_n0",
    "simulate",
    "solve_p",
    "split_reaction",
    "tail_constant",
]
