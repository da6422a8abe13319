"""Exception types shared across the package."""


class GricelabError(Exception):
    """Base class for all package errors."""


class StructuralError(GricelabError):
    """Malformed domain object: bad mask, bad token index, empty denotation."""


class ParameterError(GricelabError):
    """Invalid numeric parameter (nonpositive weight, alpha <= 0, ...)."""


class DomainError(GricelabError):
    """Query outside a model's domain, e.g. a speaker conditioned on a
    context that is false in the given world."""


class DegenerateInputError(GricelabError):
    """A score was requested whose defining probabilities are zero."""


class InternalConsistencyError(GricelabError):
    """A self-check failed (e.g. a factorization residual above tolerance);
    indicates a bug, not bad input."""


class BudgetError(GricelabError):
    """An enumeration or run would exceed its configured budget."""


class ConfigError(GricelabError):
    """Invalid experiment configuration document."""


class InvariantViolation(GricelabError):
    """An experiment detected a violation of a checked invariant."""
