"""Exception types shared across the package.

Each maps to one failure family so callers (service layer, CLI) can turn
them into stable error responses without string matching.
"""


class ShapeError(ValueError):
    """Tensor or array arguments disagree on a declared dimension."""


class NumericError(ValueError):
    """Non-finite values or numerically invalid parameters."""


class FormatError(ValueError):
    """A binary interchange file violates its header or payload contract."""


class BvhParseError(ValueError):
    """Malformed BVH text; message carries the 1-based line number."""


class ConfigError(ValueError):
    """Config file fails schema validation."""
