"""Exception hierarchy shared by all modules."""


class GThermoError(Exception):
    pass


class DomainError(GThermoError):
    """Point outside the admissible chart region."""


class ConfigError(GThermoError):
    """Invalid experiment configuration (CLI exit code 2)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class PreconditionError(GThermoError):
    """An operation's stated precondition is violated."""


class NumericalError(GThermoError):
    """Numerical failure during a run (CLI exit code 3)."""

    stage = "numerics"


class ConjugatePointError(NumericalError):
    """Riccati relaxation failed to settle; signals a non-Anosov regime."""

    stage = "riccati"


class ReductionDivergenceError(NumericalError):
    """Fundamental-domain reduction exceeded its step cap."""

    stage = "reduction"


class RenormIntervalError(NumericalError):
    """Tangent frame overflowed before the first renormalization."""

    stage = "lyapunov"


class EnergyLevelError(GThermoError):
    """Isoenergetic level k - W is not positive everywhere."""


class DegenerateFieldWarning(UserWarning):
    """Product form whose certified non-exactness is numerically negligible."""
