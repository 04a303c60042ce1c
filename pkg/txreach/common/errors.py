class DomainError(ValueError):
    """Raised when an operation is called outside its domain (bad id, coincident apex, ...)."""


class FormatError(ValueError):
    """Raised for malformed instance, query or oracle files."""
