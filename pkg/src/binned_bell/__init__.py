"""Binned Bell inequalities: LR-polytope certificates and quantum violations.

Layers:

- `lr_polytope`: coefficient tensors from outcome binning, exact
  local-realistic bounds, maximizer counts, and integer-rank tightness
  certificates.
- `qudit`: Fourier-basis measurements on the maximally entangled state,
  Bell operators, and phase optimization of the quantum value.
- `cv`: truncated two-mode squeezed states with phase-parity
  measurements, squeezing thresholds, and the displaced-parity comparison.
- `cli`: deterministic CSV/JSON scans and certification suites.
"""

from .lr_polytope import (
    BinningSpec,
    CoefficientTensor,
    DeterministicConfig,
    EnumerationLimitError,
    ExtremalVector,
    TightnessReport,
    build_coefficients,
    count_max_configs,
    deterministic_value,
    facet_threshold,
    lr_max,
    m_formula,
    tightness_certificate,
)
from .qudit import (
    BellOperatorMatrix,
    BinningPreset,
    CorrelationFunctions,
    MeasurementBasis,
    PhaseSettings,
    bell_expectation,
    build_bell_operator,
    correlation_functions,
    fourier_basis,
    joint_probability,
    max_entangled_state,
    operator_identity_residual,
    optimize_phases,
    probability_kernel,
    t1_cosine_form,
    verify_operator_identity,
)
from .cv import (
    AngleDegeneracyWarning,
    CvScenario,
    FockCutoffError,
    PhaseParityOperator,
    TruncatedTmss,
    ViolationThreshold,
    bw_bell_value,
    bw_displaced_parity_max,
    cv_bell_expectation,
    phase_state,
    required_fock_cutoff,
    squeezing_threshold,
    tmss_bell_closed_form,
    violation_boundary_r,
)

__version__ = "0.1.0"

__all__ = [
    "BinningSpec",
    "CoefficientTensor",
    "DeterministicConfig",
    "EnumerationLimitError",
    "ExtremalVector",
    "TightnessReport",
    "build_coefficients",
    "count_max_configs",
    "deterministic_value",
    "facet_threshold",
    "lr_max",
    "m_formula",
    "tightness_certificate",
    "BellOperatorMatrix",
    "BinningPreset",
    "CorrelationFunctions",
    "MeasurementBasis",
    "PhaseSettings",
    "bell_expectation",
    "build_bell_operator",
    "correlation_functions",
    "fourier_basis",
    "joint_probability",
    "max_entangled_state",
    "operator_identity_residual",
    "optimize_phases",
    "probability_kernel",
    "t1_cosine_form",
    "verify_operator_identity",
    "AngleDegeneracyWarning",
    "CvScenario",
    "FockCutoffError",
    "PhaseParityOperator",
    "TruncatedTmss",
    "ViolationThreshold",
    "bw_bell_value",
    "bw_displaced_parity_max",
    "cv_bell_expectation",
    "phase_state",
    "required_fock_cutoff",
    "squeezing_threshold",
    "tmss_bell_closed_form",
    "violation_boundary_r",
    "__version__",
]
