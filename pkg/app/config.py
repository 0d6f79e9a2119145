"""Configuration management for runtime settings."""
import os
from typing import List
from dotenv import load_dotenv

load_dotenv()


class Config:
    """Application configuration.

    Experiment parameters live in the JSON experiment config
    (see models.experiment.ExperimentConfig); this class only carries
    process-level knobs that never change results.
    """

    # Output
    OUTPUT_DIR = os.getenv("IQBO_OUTPUT_DIR", "results")

    # Parallel jobs for (policy, seed) runs
    JOBS = int(os.getenv("IQBO_JOBS", "1"))

    # Logging
    LOG_LEVEL = os.getenv("IQBO_LOG_LEVEL", "INFO").upper()

    # Cholesky jitter policy, relative to the mean diagonal
    JITTER_START = float(os.getenv("IQBO_JITTER_START", "1e-10"))
    JITTER_MAX = float(os.getenv("IQBO_JITTER_MAX", "1e-4"))
    JITTER_GROWTH = float(os.getenv("IQBO_JITTER_GROWTH", "10"))

    # Pointwise posterior variance floor
    VARIANCE_FLOOR = float(os.getenv("IQBO_VARIANCE_FLOOR", "1e-12"))

    @classmethod
    def jitter_schedule(cls) -> List[float]:
        """Relative jitter levels tried after the unjittered attempt."""
        levels = []
        level = cls.JITTER_START
        while level <= cls.JITTER_MAX * (1 + 1e-9):
            levels.append(level)
            level *= cls.JITTER_GROWTH
        return levels
