"""Exception types raised across the package."""


class ParviError(Exception):
    """Base class for all library errors."""


class InvalidBandwidthError(ParviError, ValueError):
    pass


class DimensionError(ParviError, ValueError):
    pass


class EmptyInputError(ParviError, ValueError):
    pass


class InsufficientParticlesError(ParviError, ValueError):
    pass


class DegenerateConfigurationError(ParviError, ValueError):
    """All pairwise particle distances vanish, so the median rule is undefined."""


class SingularSystemError(ParviError, ArithmeticError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DivergenceError(ParviError, ArithmeticError):
    def __init__(self, message, particle_index=None):
        super().__init__(message)
        self.particle_index = particle_index


class StalledInnerSolverError(ParviError, RuntimeError):
    pass


class ProposalFailureError(ParviError, RuntimeError):
    pass


class DatasetError(ParviError, ValueError):
    pass


class InvalidGridError(ParviError, ValueError):
    pass


class ConfigError(ParviError, ValueError):
    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line
