"""Exception hierarchy shared by every module"""

from typing import Optional


class StructuredLightError(Exception):
    """Base class for all errors raised by this package"""


class ConfigError(StructuredLightError, ValueError):
    """Invalid configuration, file content or mismatched inputs"""


class DomainError(StructuredLightError, ValueError):
    """Argument outside the domain of an operation"""


class ProjectionError(StructuredLightError):
    """Point at or behind the image plane of a device"""


class DegenerateGeometryError(StructuredLightError):
    """Camera ray and projector plane (or similar) are near-parallel"""


class ShapeError(StructuredLightError, ValueError):
    """Incompatible operand shapes while recording a tape operation"""


class NumericalError(StructuredLightError):
    """Non-finite values during optimization"""

    def __init__(self, message: str, iteration: Optional[int] = None):
        super().__init__(message)
        self.iteration = iteration
