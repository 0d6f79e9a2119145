"""CSV/JSON persistence for run artifacts."""
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional
import pandas as pd

from config import Config
from errors import IqboError
from models.trace import RunArtifact
from services.aggregator import SUMMARY_COLUMNS, TRACE_COLUMNS, aggregate, trace_frame

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"


class ArtifactStore:
    """Writes traces.csv, summary.csv and artifact.json under one output directory."""

    TRACE_FILE = "traces.csv"
    SUMMARY_FILE = "summary.csv"
    ARTIFACT_FILE = "artifact.json"

    def __init__(self, out_dir: Optional[str] = None):
        self.out_dir = Path(out_dir or Config.OUTPUT_DIR)

    # ------------------------------------------------------------------
    # Row helpers
    # ------------------------------------------------------------------

    @staticmethod
    def format_vector(values) -> str:
        return ";".join(FLOAT_FORMAT % float(v) for v in values)

    @staticmethod
    def parse_vector(text) -> List[float]:
        if text is None or (isinstance(text, float) and pd.isna(text)) or text == "":
            return []
        return [float(v) for v in str(text).split(";")]

    def _trace_rows(self, artifact: RunArtifact) -> pd.DataFrame:
        frame = trace_frame(artifact)
        frame["a_query"] = frame["a_query"].map(self.format_vector)
        frame["x_recommend"] = frame["x_recommend"].map(self.format_vector)
        return frame[TRACE_COLUMNS]

    # ------------------------------------------------------------------
    # Write / read
    # ------------------------------------------------------------------

    def _write_csv(self, frame: pd.DataFrame, name: str) -> Path:
        path = self.out_dir / name
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return path

    def emit(self, artifact: RunArtifact, formats: Iterable[str] = ("csv", "json")) -> Dict[str, Path]:
        """Write the artifact in the requested formats; returns the written paths."""
        formats = set(formats)
        unknown = formats - {"csv", "json"}
        if unknown:
            raise ValueError(f"Unknown output formats {sorted(unknown)}")
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            written = {}
            if "csv" in formats:
                written["traces"] = self._write_csv(self._trace_rows(artifact), self.TRACE_FILE)
                written["summary"] = self._write_csv(aggregate([artifact]), self.SUMMARY_FILE)
            if "json" in formats:
                path = self.out_dir / self.ARTIFACT_FILE
                path.write_text(artifact.model_dump_json(indent=2), encoding="utf-8")
                written["artifact"] = path
        except OSError as e:
            raise IqboError(f"Cannot write results to {self.out_dir}: {e}") from e
        logger.info("Store: wrote %s to %s", ", ".join(sorted(written)), self.out_dir)
        return written

    def write_summary(self, summary: pd.DataFrame) -> Path:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            return self._write_csv(summary[SUMMARY_COLUMNS], self.SUMMARY_FILE)
        except OSError as e:
            raise IqboError(f"Cannot write results to {self.out_dir}: {e}") from e

    def read_traces(self) -> pd.DataFrame:
        frame = pd.read_csv(self.out_dir / self.TRACE_FILE)
        frame["a_query"] = frame["a_query"].map(self.parse_vector)
        frame["x_recommend"] = frame["x_recommend"].map(self.parse_vector)
        return frame

    @staticmethod
    def load(path) -> RunArtifact:
        return RunArtifact.model_validate_json(Path(path).read_text(encoding="utf-8"))
