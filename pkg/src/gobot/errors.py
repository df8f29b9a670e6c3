"""Exception hierarchy shared across the package."""


class GoBotError(Exception):
    """Base class for all gobot-specific failures."""


class DataError(GoBotError):
    """A data file or record is malformed or violates its invariants."""


class SchemaConflictError(DataError):
    """Two domain schemas cannot be merged into one unified space."""


class OutOfSpaceError(GoBotError):
    """An action or index is not representable in the unified space."""


class DialogueProtocolError(GoBotError):
    """The dialogue protocol was violated (e.g. stepping a finished dialogue)."""


class TrainingDivergenceError(GoBotError):
    """The Q-network produced a non-finite loss during training."""


class TransferError(GoBotError):
    """Source weights are incompatible with the target unified space."""


class WarmStartError(GoBotError):
    """Warm start could not collect a single successful dialogue."""
