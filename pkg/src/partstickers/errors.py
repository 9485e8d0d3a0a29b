"""Exception types shared across the toolkit."""


class PartStickersError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(PartStickersError):
    """Bad user input: configs, labels, shapes, flag values."""


class IngestError(PartStickersError):
    """Fatal problem while reading a dataset from disk."""


class EmptyPartError(ValidationError):
    """A mask with no foreground pixels reached an operation that needs one."""


class TrainingDiverged(PartStickersError):
    """Loss went non-finite; carries the offending batch index."""

    def __init__(self, epoch: int, batch_index: int):
        self.epoch = epoch
        self.batch_index = batch_index
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch_index}"
        )
