"""Space-time spectral Galerkin solver for time-periodic compressible flow
interacting with a viscoelastic beam.

The coupled problem is regularised (penalised kinematic coupling,
damped continuity equation, artificial pressure) and solved by a
fixed-point iteration over three decoupled sub-solves.  See
:mod:`pfsi.driver` for the iteration and :mod:`pfsi.cli` for the
command line front end.
"""

from .errors import (ArchiveError, ConfigurationError, InputDomainError, InternalError,
                     PFSIError, SolverError)
from .geometry import DomainSpec
from .basis import (SpectralField, make_beam_basis, make_fluid_basis, make_time_basis)
from .density import DensityField, solve_density
from .structure import BeamState, solve_structure
from .fluid import FluidParams, solve_fluid, fluid_residual
from .driver import (ContinuationSchedule, SolverConfig, Stage, build_context,
                     default_schedule, initial_state, run_continuation, run_stage)
from .diagnostics import (coupled_weak_residual, energy, energy_balance,
                          energy_inequality, penalty_residual)

__version__ = "0.1.0"
