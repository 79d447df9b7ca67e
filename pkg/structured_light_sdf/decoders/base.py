"""Base decoder interface"""

from abc import ABC, abstractmethod
from typing import Optional

from ..models import CaptureSet, Correspondence, PatternSet


class BaseDecoder(ABC):
    """Base class for classical structured-light decoders"""

    @abstractmethod
    def decode(self, captures: CaptureSet, patterns: PatternSet,
               config: Optional[dict] = None) -> Correspondence:
        """
        Decode captured images into projector columns

        Args:
            captures: Camera images in projection order, with their a/b maps
            patterns: The pattern set that was projected
            config: Optional decoder settings (b_floor, interpolate, ...)

        Returns:
            Per camera pixel sub-pixel projector column
        """
        pass

    @abstractmethod
    def get_name(self) -> str:
        """Get the name of this decoder"""
        pass
