"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line can map failures
onto the documented process status without inspecting messages.
"""


class GexpectError(Exception):
    exit_code = 1


class ConfigurationError(GexpectError):
    """Invalid or unsupported run configuration."""


class InputError(ConfigurationError):
    """An argument has the wrong shape or refers to the wrong object."""


class DomainError(ConfigurationError):
    """A claim or parameter lies outside the domain an operation accepts."""


class PreconditionError(ConfigurationError):
    """A structural hypothesis required by an operation does not hold."""


class UnsupportedConfiguration(ConfigurationError):
    """The requested backend cannot handle this model."""


class SpecificationError(ConfigurationError):
    """A preset violates its own declared constants (e.g. Lipschitz bound)."""


class NumericalError(GexpectError):
    exit_code = 2


class VerdictMismatch(GexpectError):
    exit_code = 3
