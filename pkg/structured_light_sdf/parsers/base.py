"""Base parser interface"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any


class BaseParser(ABC):
    """Base class for the file formats this package reads"""

    @property
    @abstractmethod
    def kind(self) -> str:
        """The file kind this parser handles"""
        pass

    @abstractmethod
    def parse(self, file_path: Path) -> Any:
        """
        Parse a file (or, for image sets, a directory with a manifest)

        Args:
            file_path: Path to the file or directory

        Returns:
            The domain object stored in it
        """
        pass

    def validate(self, file_path: Path) -> bool:
        """
        Validate that a path can be parsed by this parser

        Args:
            file_path: Path to validate

        Returns:
            True if the path exists with the expected shape
        """
        try:
            return Path(file_path).exists()
        except Exception:
            return False
