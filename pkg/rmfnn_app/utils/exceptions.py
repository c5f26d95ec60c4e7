from typing import Optional


class RmfnnError(Exception):
    """
    Base class of the errors raised by the surrogate library.
    """


class UsageError(RmfnnError):
    """
    Raised when the caller passes arguments that violate an operation's preconditions.
    """


class NumericalError(RmfnnError):
    """
    Raised when a computation fails numerically.
    """


class InvalidNetworkSpec(UsageError):
    pass


class DimensionMismatch(UsageError):
    pass


class EmptyDataset(UsageError):
    pass


class MissingTargets(UsageError):
    pass


class InvalidStepSize(UsageError):
    pass


class OutOfDomain(UsageError):
    pass


class DesignError(UsageError):
    pass


class NormalizationError(UsageError):
    pass


class UnsupportedProblem(UsageError):
    pass


class InvalidInput(UsageError):
    pass


class TrainingDiverged(NumericalError):
    """
    Raised when the training loss becomes non-finite.
    """

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__('Training diverged at epoch {} (loss {})'.format(epoch, loss))


class CheckpointError(UsageError):
    """
    Raised when a checkpoint file cannot be parsed. The field and, for JSON syntax errors, the character
    offset are kept on the exception.
    """

    def __init__(self, message: str, field: Optional[str] = None, offset: Optional[int] = None):
        self.field = field
        self.offset = offset
        details = []
        if field is not None:
            details.append('field {}'.format(field))
        if offset is not None:
            details.append('offset {}'.format(offset))
        super().__init__('{} ({})'.format(message, ', '.join(details)) if details else message)
