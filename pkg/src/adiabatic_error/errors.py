"""Exception hierarchy shared by all modules."""


class SimulationError(Exception):
    """Base class for numerical failures (CLI exit code 3)."""


class HermiticityError(ValueError):
    """Matrix is not Hermitian within the construction tolerance."""


class DimensionMismatchError(ValueError):
    pass


class DegenerateGroundStateError(SimulationError):
    """Ground state of H1 is degenerate, so the initial state is ambiguous."""


class GapUnderflowError(SimulationError):
    """First gap is positive but too small for the perturbative estimates."""


class ConvergenceError(SimulationError):
    """An iterative procedure (eigensolver, refinement, quadrature) failed."""


class MagnusDivergenceError(SimulationError):
    """The sufficient Magnus convergence condition is violated."""


class RegimeError(SimulationError):
    """Errors are not in the quadratic small-lambda regime."""


class ConfigError(ValueError):
    """Malformed experiment config or input file (CLI exit code 2)."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)
