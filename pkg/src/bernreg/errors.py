"""Exception types raised by bernreg."""


class BernregError(ValueError):
    """Base class for input errors raised by the library."""


class DomainError(BernregError):
    """An argument lies outside the domain of the operation."""


class DegenerateInputError(BernregError):
    """Input is too small or too degenerate for the requested operation."""


class ConfigurationError(BernregError):
    """Hyperparameters or sampler settings are mutually inconsistent."""
