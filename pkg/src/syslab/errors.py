"""Exception types shared across syslab."""


class SyslabError(Exception):
    """Base class for all syslab errors."""


class DomainError(SyslabError, ValueError):
    """A point or parameter lies outside the domain of an operation."""


class ValidationError(SyslabError, ValueError):
    """Malformed input data (meshes, decorated surfaces, config)."""


class ToleranceViolation(SyslabError):
    """A numerical certificate failed its stated tolerance."""


class ResourceBudgetError(SyslabError):
    """The requested computation does not fit the configured budget."""
