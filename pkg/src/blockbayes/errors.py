"""Exception hierarchy shared by all pipeline stages."""


class BlockBayesError(Exception):
    """Base class for every error raised by this package."""


class PgmFormatError(BlockBayesError, ValueError):
    """Malformed PGM header or unsupported magic number."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PgmTruncatedError(BlockBayesError, ValueError):
    """Raster holds fewer samples than width * height."""


class InvalidGridError(BlockBayesError, ValueError):
    pass


class DegenerateBlockError(BlockBayesError, ValueError):
    """Block has no pixel pair at the requested co-occurrence offset."""


class InsufficientDataError(BlockBayesError, ValueError):
    pass


class DimensionError(BlockBayesError, ValueError):
    pass


class DegenerateStructureError(BlockBayesError, ValueError):
    """Tree/forest structures need at least two attributes; use NB instead."""


class DomainError(BlockBayesError, ValueError):
    """Attribute value outside the cardinality the model was trained with."""


class StratificationError(BlockBayesError, ValueError):
    pass


class ConfigurationError(BlockBayesError, ValueError):
    pass
