"""Base pattern generator interface"""

from abc import ABC, abstractmethod
from typing import Tuple

from ..errors import DomainError
from ..models import PatternKind, PatternSet


class BasePatternGenerator(ABC):
    """Base class for projector pattern generators"""

    @property
    @abstractmethod
    def kind(self) -> PatternKind:
        """The pattern kind this generator emits"""
        pass

    @abstractmethod
    def generate(self, resolution: Tuple[int, int], **params) -> PatternSet:
        """
        Generate a pattern set

        Args:
            resolution: Projector (height, width) in pixels
            **params: Generator-specific parameters

        Returns:
            PatternSet in projection order
        """
        pass

    @staticmethod
    def check_resolution(resolution: Tuple[int, int]) -> Tuple[int, int]:
        height, width = (int(resolution[0]), int(resolution[1]))
        if height < 2 or width < 2:
            raise DomainError(f"projector resolution too small: {height}x{width}")
        return height, width
