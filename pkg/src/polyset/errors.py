"""Exception hierarchy shared by all polyset modules."""


class PolySetError(Exception):
    """Base class for every error raised by polyset."""


class DomainError(PolySetError, ValueError):
    """An input lies outside the domain an operation accepts."""


class FitError(PolySetError):
    """A distribution family could not be matched to the requested moments."""


class CapabilityError(PolySetError):
    """The requested operation is not supported for this input kind."""


class VocabularyError(DomainError):
    """A monomer identifier is not in the encoder vocabulary."""


class ShapeError(PolySetError, ValueError):
    """Array dimensions do not agree."""


class NumericError(PolySetError, ArithmeticError):
    """A non-finite value appeared during a computation."""


class TrainingError(PolySetError):
    """Training diverged or could not proceed."""

    def __init__(self, message, epoch=None, train_curve=(), val_curve=()):
        super().__init__(message)
        self.epoch = epoch
        self.train_curve = list(train_curve)
        self.val_curve = list(val_curve)


class CorpusError(PolySetError):
    """A corpus or split file is malformed or has an unsupported schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
