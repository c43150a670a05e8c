"""Exception types shared across the package."""


class ArxnetError(Exception):
    """Base class for all package-specific errors."""


class GenerationBudgetExceeded(ArxnetError):
    """No admissible network found within the generation attempt budget."""


class DimensionMismatch(ArxnetError):
    """Array shapes are inconsistent with the declared problem sizes."""


class InsufficientData(ArxnetError):
    """Too few samples to build the requested regression problem."""


class EmptyDictionary(ArxnetError):
    """A basis dictionary with no entries was supplied."""


class SingularSystem(ArxnetError):
    """A linear system required by the posterior computation is singular."""


class MaxIterationsExceeded(ArxnetError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class DegenerateTruth(ArxnetError):
    """A ground-truth reference vector is identically zero."""
