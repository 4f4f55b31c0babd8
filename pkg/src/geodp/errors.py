"""Exception and warning types shared across the package."""


class GeodpError(Exception):
    """Base class for all package errors."""


class DomainError(GeodpError):
    """Tangent vector norm exceeds the manifold's injectivity guard."""


class InvalidTangent(GeodpError):
    """Tangent vector is not based where the operation requires."""


class CutLocusError(GeodpError):
    """Target point lies at or beyond the cut locus of the base point."""


class ManifoldMismatch(GeodpError):
    """Operands live on different manifolds."""


class BaseMismatch(GeodpError):
    """Tangent vectors are based at different points."""


class DegenerateInput(GeodpError):
    """Raw coordinates cannot be projected onto the manifold."""


class DegenerateCovariates(GeodpError):
    """All covariates coincide, so rescaling to [0, 1] is impossible."""


class NonpositiveBudget(GeodpError):
    """Privacy budgets must be strictly positive and finite."""


class MalformedRow(GeodpError):
    """A landmark-file row does not parse to the expected layout."""


class DegenerateShape(GeodpError):
    """A landmark configuration collapses to a single point."""


class ConfigError(GeodpError):
    """Experiment configuration violates the schema."""


class DataFormatError(GeodpError):
    """Dataset file does not parse or fails validation."""


class PrivacyWarning(UserWarning):
    """A data-dependent quantity weakens the formal privacy guarantee."""


class FitWarning(UserWarning):
    """A fitted model violates a soft modelling assumption."""
