"""Exception hierarchy shared across the package.

The CLI maps each family onto an exit code: configuration problems exit 2,
world/data problems exit 3, numerical aborts exit 4.
"""


class PlantnavError(Exception):
    """Base class for all package errors."""


class ConfigError(PlantnavError):
    """Invalid configuration value, schema violation or unknown key."""


class WorldError(PlantnavError):
    """Invalid world geometry or an unreadable world file."""


class OutOfBoundsError(WorldError):
    """A point outside the simulation space was passed where one inside is required."""


class InsideObstacleError(WorldError):
    """Clearance was requested for a point lying inside an obstacle."""


class ContractError(PlantnavError):
    """An operation was called in a state its contract does not allow."""


class NumericalError(PlantnavError):
    """Non-finite loss or gradient encountered during training."""


class CheckpointError(PlantnavError):
    """Base class for checkpoint loading failures."""


class BadMagicError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


class LayoutMismatchError(CheckpointError):
    """Checkpoint was written for a different feature layout."""
