from typing import NoReturn, Optional

from loguru import logger


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class SuperfractalError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(SuperfractalError, ValueError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class NumericalError(SuperfractalError, ArithmeticError):
    pass


class SingularEvaluationError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class MassConservationError(NumericalError):
    pass


class DegenerateFitError(NumericalError):
    pass


class GeometryError(SuperfractalError, ValueError):
    pass


class ShapeMismatchError(GeometryError):
    pass


class NotSimilitudeError(GeometryError):
    pass


class ChainingError(GeometryError):
    pass


class EmptyRasterError(GeometryError):
    pass


def exit_code_for(exc: BaseException) -> Optional[int]:
    """CLI exit code for a handled error, None when the error should propagate."""
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, SuperfractalError):
        return EXIT_CONFIG
    return None


def fail(exc_type: type, message: str) -> NoReturn:
    logger.error(message)
    raise exc_type(message)
