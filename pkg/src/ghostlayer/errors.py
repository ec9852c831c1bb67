"""Exception hierarchy shared by all ghostlayer modules.

The CLI maps these onto exit codes: usage errors -> 2, input/format
errors -> 3, numeric failures -> 4.
"""


class GhostlayerError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(GhostlayerError):
    """Bad command-line arguments or config-file values."""


class ConfigurationError(GhostlayerError):
    """Incompatible shapes, unknown layer names, invalid parameters."""


class FormatError(GhostlayerError):
    """Malformed input file (bad magic, truncated stream, broken PNG)."""


class ValidationError(GhostlayerError):
    """Structurally valid file whose contents fail a consistency check."""


class NumericError(GhostlayerError):
    """Non-finite values encountered during optimization."""
