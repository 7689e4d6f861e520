class ResourceLimitError(RuntimeError):
    """An enumeration or LP would exceed its configured cap."""


class ValidationError(ValueError):
    """Input objects violate a structural invariant."""
