"""CSV table exporter for metrics, sweeps and ablations"""

import csv
from pathlib import Path
from typing import Dict, List

from .base import BaseExporter


class CSVExporter(BaseExporter):
    """Export a list of row dictionaries; columns follow the first row"""

    def get_name(self) -> str:
        return "csv"

    def export(self, obj: List[Dict], output_path: Path, config: dict = None) -> Path:
        config = config or {}
        if output_path.is_dir():
            output_path = output_path / config.get("filename", "table.csv")
        output_path.parent.mkdir(parents=True, exist_ok=True)
        columns = config.get("columns") or (list(obj[0].keys()) if obj else [])
        with open(output_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=columns)
            writer.writeheader()
            for row in obj:
                writer.writerow(row)
        return output_path
