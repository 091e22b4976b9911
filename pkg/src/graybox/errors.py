"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, DataError -> 3,
StageError -> 4, everything else -> 1.
"""


class GrayboxError(Exception):
    """Base class for all package errors."""


class ConfigError(GrayboxError):
    """Invalid configuration (unknown keys, bad values, unbuildable layer graph)."""


class DataError(GrayboxError):
    """Malformed or inconsistent dataset files."""


class FormatError(DataError):
    """A binary container failed magic/structure validation."""


class ShapeError(GrayboxError):
    """Tensor shape disagreement; message names the offending layer/op."""


class ContractError(GrayboxError):
    """A caller violated an operation precondition."""


class DivergenceError(GrayboxError):
    """NaN/Inf appeared in gradients or loss during an optimizer step."""


class StageError(GrayboxError):
    """A pipeline stage failed or a required upstream artifact is missing."""
