"""madflow: a numerical laboratory for wave-field flow variables.

Extracts Madelung flow variables (density, current and osmotic velocities,
quantum potential) from wave fields, evolves linear and nonlinear wave
equations, integrates guided and stochastic walker ensembles, and verifies
circulation quantization and node regularity on 2D vortex states.
"""

from .errors import (ConfigError, ConjugatePointError, ContractError,
                     HorizonError, InsufficientDataError, MadflowError,
                     NodeEncounterError, NodeProximityError, OutOfDomainError,
                     PreCausticError, ShootingError, StabilityError,
                     StructuralError)
from .grids import (DIRICHLET, PERIODIC, Grid, MassMatrix, WaveField,
                    gradient, interpolate, laplacian, mesh_from_center)
from .madelung import (FlowField, densitized_q_identity_residual,
                       phase_line_integral, polar_decompose, quantum_potential)
from .potentials import PotentialSpec, free, harmonic
from .dynamics import (EvolutionConfig, WaveRun, classical_flow, detect_caustic,
                       equivalence_check, evolve, hj_residuals,
                       step_pre_schrodinger, step_schrodinger, two_point_action)
from .trajectories import (TrajectorySet, equivariance_test,
                           fokker_planck_residual, integrate_bohmian,
                           integrate_nelson, mean_acceleration_residual)
from . import nodes, states

__version__ = "0.1.0"
