"""Exception hierarchy shared by the numerical modules and the CLI."""


class BoseLDPError(Exception):
    """Base class for all package errors."""


class ParameterError(BoseLDPError, ValueError):
    """Invalid model or run parameters (CLI exit code 1)."""


class DomainError(BoseLDPError, ValueError):
    """Argument outside the domain of a special function."""


class DivergenceError(DomainError):
    """Series diverges at the requested argument."""


class SingularityError(BoseLDPError, ArithmeticError):
    """Function value exists but the requested derivative is infinite."""


class RegimeError(BoseLDPError, RuntimeError):
    """Parameters fall outside the regime where a solver is justified (CLI exit code 2)."""


class StateSpaceError(BoseLDPError, ValueError):
    """Exhaustive enumeration would exceed the allowed state-space size."""
