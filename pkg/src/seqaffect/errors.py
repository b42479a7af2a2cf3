"""Exception types shared across the toolkit."""


class FormatError(ValueError):
    """A file or payload does not match its declared schema."""


class IntegrityError(RuntimeError):
    """An internal consistency guarantee was violated (e.g. uncovered steps)."""
