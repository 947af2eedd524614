"""Adiabatic approximation error for interpolated Hamiltonians H1 + lam f(t) dH."""

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateGroundStateError,
    DimensionMismatchError,
    GapUnderflowError,
    HermiticityError,
    MagnusDivergenceError,
    RegimeError,
    SimulationError,
)
from .estimator import (
    CouplingDecomposition,
    ErrorReport,
    a_coefficient_linear,
    a_coefficient_quadratic,
    a_coefficient_quadrature,
    asymptotic_prefactor,
    decompose,
    direct_fidelity,
    epsilon_estimate,
    epsilon_exact,
    excess_coefficient,
    fidelity_lower_bound,
    ground_energy_perturbative,
)
from .harness import (
    ExperimentConfig,
    RunRow,
    ScalingFit,
    fit_scaling,
    parse_config,
    ratio_study,
    run_experiment,
)
from .operators import (
    HermitianOperator,
    QuantumState,
    Spectrum,
    expectation,
    offset_ground,
    parse_matrix,
    read_matrix,
    spectrum,
    write_matrix,
)
from .propagator import EvolutionResult, MagnusTerms, convergence_margin, evolve, magnus_evolve, magnus_terms
from .schedules import Linear, Quadratic, Resonant, Schedule, Tabulated, parse_schedule
from .systems import random_system, reference_system

__version__ = "0.1.0"
