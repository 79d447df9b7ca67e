"""Base exporter interface"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any


class BaseExporter(ABC):
    """Base class for exporters"""

    @abstractmethod
    def export(self, obj: Any, output_path: Path, config: dict = None) -> Path:
        """
        Export a domain object

        Args:
            obj: Object to export
            output_path: File or directory to export to
            config: Optional configuration dictionary

        Returns:
            Path to the exported file (or directory)
        """
        pass

    @abstractmethod
    def get_name(self) -> str:
        """Get the name of this exporter"""
        pass
