"""Scalar stochastic delay differential equations at the verge of Hopf
instability: simulation, delay-free reduction, stochastic averaging, and
desk-scale validation of the reduction error."""

from .functionals import LinearFunctionalSpec, NonlinearitySpec, point_delay
from .segment import OutOfWindow, SegmentBuffer, apply_functional
from .spectral import (
    CriticalPair,
    CriticalityReport,
    DecayFit,
    Rectangle,
    characteristic_value,
    compute_psi_tilde,
    critical_pair,
    find_roots,
    fit_decay,
    gamma_table,
    project,
    verify_criticality,
)
from .wiener import WienerPath
from .sdde import (
    AdditiveNoise,
    MultiplicativeNoise,
    SddeConfig,
    StiffStep,
    project_trajectory,
    simulate_sdde,
)
from .reduced import (
    CoupledRun,
    StableTransient,
    build_transient,
    coupled_run,
    simulate_zhat,
    simulate_ztilde,
    stopping_diagnostics,
)
from .ensemble import run_coupled_ensemble, run_full_ensemble
from .averaging import (
    AmplitudeSde,
    averaged_additive,
    averaged_multiplicative_coeffs,
    averaged_multiplicative_from_operators,
    check_stabilizing,
    exit_time,
    simulate_h0,
    simulate_h0_ensemble,
)
from .stats import EmpiricalCdf, ks_distance, loglog_slope, modulus_of_continuity

__version__ = "0.1.0"
