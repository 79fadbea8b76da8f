"""Exception hierarchy shared by all featpress modules."""


class FeatpressError(Exception):
    """Base class for every error raised by featpress."""


class DataError(FeatpressError, ValueError):
    """Input data violates a contract (bad cell, wrong shape, bad class layout)."""


class SchemaError(DataError):
    """Feature names or widths of two objects do not line up."""


class FormatError(DataError):
    """A serialized container is malformed, truncated or from another version."""
