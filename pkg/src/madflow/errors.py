"""Exception taxonomy for the solver and analysis layers."""


class MadflowError(Exception):
    """Base for all package errors."""


class StructuralError(MadflowError):
    """Shape/dimension mismatch or an ill-formed object."""


class ContractError(MadflowError):
    """A precondition on input data was violated (e.g. unnormalized state)."""


class ConfigError(MadflowError):
    """Bad scenario configuration; maps to CLI exit code 1."""


class StabilityError(ConfigError):
    """Step size violates the stability/accuracy bound of the chosen integrator."""


class OutOfDomainError(MadflowError):
    """Query point left a dirichlet domain."""

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class NodeProximityError(MadflowError):
    """A path or circle came too close to masked (near-zero density) points."""


class NodeEncounterError(MadflowError):
    """A walker ran into a wave-function node."""

    def __init__(self, msg, walker=None, time=None):
        super().__init__(msg)
        self.walker = walker
        self.time = time


class PreCausticError(MadflowError):
    """The nonlinear engine hit a node/blow-up: the flow description broke down."""

    def __init__(self, msg, time=None):
        super().__init__(msg)
        self.time = time


class ShootingError(MadflowError):
    """Boundary-value shooting failed to converge to a classical path."""


class ConjugatePointError(MadflowError):
    """Two-point problem posed beyond the first conjugate point."""


class InsufficientDataError(MadflowError):
    """Not enough samples/rings/snapshots for the requested estimate."""


class HorizonError(MadflowError):
    """Comparison window empty (e.g. caustic before the first checkpoint)."""
