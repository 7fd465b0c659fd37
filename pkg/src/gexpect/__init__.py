"""g-expectations, g-capacities and Choquet integrals with PDE and LSMC backends."""

__version__ = "0.1.0"

from .choquet import ChoquetResult, ThresholdQuadrature, choquet_integral, comonotonic_check, truncation_convergence
from .claims import (AbsValueClipped, Identity, IdentityClipped, Indicator, MollifiedIndicator, SmoothMonotone, Step,
                     TerminalClaim, TwoBump, make_step_approximation, mollify_indicator)
from .errors import (ConfigurationError, DomainError, GexpectError, InputError, NumericalError, PreconditionError,
                     UnsupportedConfiguration, VerdictMismatch)
from .expectation import EventSpec, ExpectationResult, Model, SolverParams, capacity, g_expectation
from .generators import GeneratorSpec, classify_generator
from .sde import CoefficientField, TimeGrid, simulate_paths
from .verify import ScenarioSpec, VerificationReport, run_scenario_matrix, verify_representation
