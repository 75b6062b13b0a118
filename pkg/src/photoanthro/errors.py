"""Exception hierarchy.

Every error carries a short machine-readable ``category`` so the CLI can
report failures without parsing messages.
"""


class PhotoAnthroError(Exception):
    category = "error"


class ParseError(PhotoAnthroError, ValueError):
    category = "parse"


class SchemaError(PhotoAnthroError, ValueError):
    category = "schema"


class ValidationError(PhotoAnthroError, ValueError):
    category = "validation"


class DegenerateGeometryError(PhotoAnthroError, ValueError):
    category = "degenerate-geometry"


class InsufficientDataError(PhotoAnthroError, ValueError):
    category = "insufficient-data"


class UnsupportedSizeError(PhotoAnthroError, ValueError):
    category = "unsupported-size"


class DegenerateSampleError(PhotoAnthroError, ValueError):
    category = "degenerate-sample"


class DesignError(PhotoAnthroError, ValueError):
    category = "design"


class ShapeError(PhotoAnthroError, ValueError):
    category = "shape"


class TaskError(PhotoAnthroError, ValueError):
    category = "task"


class OptimizerError(PhotoAnthroError, ArithmeticError):
    category = "optimizer"


class StratificationError(PhotoAnthroError, ValueError):
    category = "stratification"


class ModelFormatError(PhotoAnthroError, ValueError):
    category = "model-format"


class IncompatibleVersionError(ModelFormatError):
    category = "incompatible-version"


class ConfigError(PhotoAnthroError, ValueError):
    category = "config"
