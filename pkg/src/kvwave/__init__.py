"""Modal Galerkin simulator for the strongly damped Kelvin-Voigt wave equation."""

from .config import ConfigError, SimConfig, parse_config, render_config
from .diagnostics import (
    BT_PROTOTYPE,
    KELVIN_VOIGT,
    EnergyTrace,
    build_certificate,
    check_decay_bound,
    check_integral_inequality,
    check_prototype_bounds,
    decay_constant,
    regular_energy,
    regular_identity_residual,
    weak_energy,
    weak_identity_residual,
)
from .errors import (
    BlowUpError,
    DomainMismatchError,
    InsufficientHorizonError,
    InvalidConfigurationError,
    InvalidDataError,
    InvalidToleranceError,
    KVWaveError,
    ProjectionAccuracyError,
    StiffnessWarning,
    WrongModelError,
)
from .evolution import IntegratorSpec, evolve, exponential_formula, step_implicit_euler, step_rk4, step_yosida_rk4
from .resolvent import (
    ResolventProblem,
    ResolventSolution,
    resolvent,
    solve_resolvent,
    verify_contraction,
    verify_m_dissipativity,
)
from .spectral import InitialData, Interval, Rectangle, SpectralDomain, build_domain, project_initial_data
from .state import ModalState, apply_operator, chi, dissipativity_gap, h_inner, h_norm

__version__ = "0.1.0"
