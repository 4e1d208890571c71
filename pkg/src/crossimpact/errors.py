class CrossImpactError(Exception):
    """Base class for library errors."""


class ValidationError(CrossImpactError, ValueError):
    """Bad input: malformed config, inconsistent dimensions, invalid parameters."""


class KernelDomainError(ValidationError):
    """Kernel evaluated outside its domain (e.g. a power law at zero lag)."""


class NumericalError(CrossImpactError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy answer."""
