"""American put pricing under a general stochastic-volatility model.

The value function solves an obstacle problem for a degenerate parabolic
operator.  This package discretises it on a truncated log-price/variance box,
solves the penalised problem by Newton iteration, cross-checks against a
projected SOR solve and Monte Carlo optimal stopping, and extracts the
exercise boundary.
"""

from .errors import (AcceptanceViolation, ConfigurationError, DegenerateBoundaryUnsupported,
                     FicheraUncertainError, HorizonTooShortError, OracleFailure,
                     ParameterDomainError, RegressionDegenerateError, StepFailure,
                     SVAmericanError, TruncationError)
from .free_boundary import (FreeBoundary, check_partition, check_structure, extract,
                            perpetual_boundary)
from .grid import Grid, Surface, build_grid, from_physical, to_physical
from .mc_oracle import (MCEstimate, Method, PathBundle, degenerate_boundary_check,
                        european_value, lsmc_value, policy_value, simulate)
from .model import (FicheraCase, FicheraReport, SVModel, absorbed_model, fichera_classify,
                    heston_model, model_from_config, register_model, validate_assumptions)
from .penalty import PenaltyParams, beta, beta_prime, pi_prime, pi_smooth
from .solver import (OperatorStencil, SolveConfig, SolveResult, assemble, monotonicity_report,
                     psor_solve, solve, step)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
