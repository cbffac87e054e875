"""Exception taxonomy shared by every module.

Each class maps to one failure mode the operations promise to report:
contract violations, bad configuration, degenerate inputs, file-format
problems, size caps, and optimizer divergence.
"""


class PhdkitError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(PhdkitError):
    """A call violated an operation's precondition (shapes, domains, flags)."""


class ConfigError(PhdkitError):
    """A configuration value is out of range or unknown."""


class DegenerateInputError(PhdkitError):
    """Input data is empty or otherwise too degenerate to process."""


class CapacityError(PhdkitError):
    """Input exceeds a documented desk-scale size cap."""


class FormatError(PhdkitError):
    """A file could not be parsed. Carries the byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingError(PhdkitError):
    """Optimization diverged. Carries the epoch at which it happened."""

    def __init__(self, message: str, epoch: int | None = None):
        if epoch is not None:
            message = f"{message} (epoch {epoch})"
        super().__init__(message)
        self.epoch = epoch
