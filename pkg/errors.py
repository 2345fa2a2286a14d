from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


class OctFluidError(Exception):
    """
    Base class for all errors raised by the pipeline.
    The class attribute "exit_code" is the process exit code used by the command line.
    """
    exit_code: int = EXIT_RUNTIME


class MetaImageFormatError(OctFluidError):

    def __init__(self, key: str, path: Optional[str] = None, detail: Optional[str] = None):
        self.key = key
        self.path = path
        message = 'MetaImage header key "{0:s}" is missing or garbled'.format(key)
        if path is not None:
            message += ' in "{0:s}"'.format(path)
        if detail is not None:
            message += " ({0:s})".format(detail)
        super().__init__(message)


class TruncationError(OctFluidError):

    def __init__(self, path: str, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__('Payload "{0:s}" holds {1:d} bytes, {2:d} expected.'.format(path, actual, expected))


class DomainError(OctFluidError, ValueError):
    exit_code = EXIT_USAGE


class PreconditionError(OctFluidError, ValueError):
    exit_code = EXIT_USAGE


class ConfigError(OctFluidError, ValueError):
    exit_code = EXIT_USAGE


class InfeasibleBudgetError(OctFluidError):
    exit_code = EXIT_USAGE


class ShapeError(OctFluidError, ValueError):

    def __init__(self, message: str, axis: Optional[int] = None):
        self.axis = axis
        super().__init__(message)


class UndefinedAucError(OctFluidError, ValueError):
    pass


class NonFiniteLossError(OctFluidError, ArithmeticError):

    def __init__(self, epoch: int, batch: int, lr: float, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.lr = lr
        self.loss = loss
        super().__init__("Non-finite loss {0!r} at epoch {1:d}, batch {2:d} (lr={3:.6g}).".format(loss, epoch, batch, lr))


class MissingArtifactError(OctFluidError):
    exit_code = EXIT_USAGE

    def __init__(self, path: str, what: str = "artifact"):
        self.path = path
        super().__init__('Missing {0:s}: "{1:s}".'.format(what, path))
