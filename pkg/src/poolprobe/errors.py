"""Exception types shared across the package."""


class PoolprobeError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PoolprobeError, ValueError):
    """Operands have incompatible or unexpected shapes."""


class ConfigError(PoolprobeError, ValueError):
    """A configuration value is outside its valid range."""


class DataError(PoolprobeError, ValueError):
    """A dataset or split cannot support the requested operation."""


class FeatureFormatError(PoolprobeError, ValueError):
    """A feature file does not carry the expected magic/version."""


class FeatureLengthError(PoolprobeError, ValueError):
    """A feature file payload is shorter or longer than its header claims."""


class ManifestError(PoolprobeError, ValueError):
    """A dataset manifest violates its contract."""


class ManifestLabelError(ManifestError):
    """A record's label index is outside the class vocabulary."""


class ManifestFoldError(ManifestError):
    """Fold ids are out of range or some fold has no records."""


class ManifestFileError(ManifestError):
    """A referenced feature file does not exist."""
