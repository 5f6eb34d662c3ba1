"""Numerical laboratory for weakly coupled Klein-Gordon chains and their
discrete nonlinear Schrodinger envelope reductions.

The package simulates the periodic chain

    xi_j'' + xi_j + rho xi_j^3 = eps (xi_{j+1} + xi_{j-1})

and the envelope equations that approximate its small-amplitude dynamics,
and measures the quality of that approximation: residual sizes, error
scaling exponents across coupling sweeps, validity horizons, the spectral
normal form of the coupling matrix, and soliton-built approximate breathers.
"""

from .errors import (
    BlowUpError,
    NewtonDivergenceError,
    NewtonSingularError,
    RegimeError,
    ThresholdError,
)
from .lattice_core import (
    LatticeState,
    ModelParams,
    RescaledCoupling,
    energy_dkg,
    l2_norm,
    rescale_to_standard,
)
from .dnls_models import (
    DnlsModel,
    EnvelopeState,
    GeneralizedDnls,
    NormalFormDnls,
    StandardDnls,
    l2_conserved,
    rhs,
    rhs_generalized,
    rhs_normalform,
    rhs_standard,
    second_derivative,
)
from .integrators import (
    IntegratorConfig,
    Trajectory,
    integrate,
    step_dkg_verlet,
    step_envelope_rk4,
)
from .approximation import (
    AnsatzSample,
    JustificationConfig,
    JustificationReport,
    error_energy,
    error_energy_rate,
    fit_scaling_exponent,
    leading_order,
    residual_direct,
    residual_expanded,
    run_justification,
)
from .normal_form import (
    DecayCertificate,
    NormalFormCoeffs,
    ThresholdConstants,
    decay_certificate,
    h_omega,
    keff_energy,
    linear_transform,
    mode_frequencies,
    sqrt_circulant,
    sqrt_circulant_series,
    thresholds,
)
from .solitons import (
    BreatherReturnReport,
    SolitonProfile,
    breather_return_error,
    build_breather_initial,
    solve_soliton,
    stationary_defect,
)

__version__ = "0.1.0"
