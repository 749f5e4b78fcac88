"""Exception types shared across the package.

The CLI maps these onto its exit-status taxonomy; library code raises them
directly.
"""


class SigmalabError(Exception):
    """Base class for all package errors."""


class ConfigError(SigmalabError):
    """Invalid user input: unknown descriptor, bad parameter, broken config."""


class MeshError(SigmalabError):
    """Mesh construction or validation failure."""


class ResourceLimitError(SigmalabError):
    """A configured resource cap (vertex count, sample budget) was exceeded."""


class EllipticityError(SigmalabError):
    """A coefficient field failed an ellipticity requirement."""


class SolverError(SigmalabError):
    """Linear solve failed or produced an unacceptable residual."""


class DegenerateInputError(SigmalabError):
    """Input is degenerate for the requested operation (constant trace, zero field)."""


class NotInjectiveError(SigmalabError):
    """A mapping violates the injectivity hypothesis required by the operation."""
