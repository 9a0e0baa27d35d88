"""Exception types. Domain errors on bad arguments raise plain ValueError;
these classes mark conditions a caller may want to catch separately."""


class CrmsbmError(Exception):
    """Base class for package-specific failures."""


class ResourceLimitError(CrmsbmError):
    """A configured resource cap would be exceeded (atom count, edge count)."""


class NumericError(CrmsbmError):
    """A numeric invariant broke (NaN in the joint, non-convergent quadrature)."""
