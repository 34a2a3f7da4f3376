"""
Monitoring Service
Counts model calls by category and keeps a run log of command executions
"""

import json
import logging
import threading
from collections import Counter
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

from config.settings import COMMANDS

logger = logging.getLogger(__name__)

CALL_CATEGORIES = ("hessian", "baseline", "evaluation", "orientation", "loss", "other")


class CallCounter:
    """Simulate-call counter keyed by category"""

    def __init__(self):
        self._counts = Counter()
        self._lock = threading.Lock()

    def record(self, category: str = "other", count: int = 1) -> None:
        if category not in CALL_CATEGORIES:
            raise ValueError(f"Unknown call category: {category}")
        with self._lock:
            self._counts[category] += count

    def get(self, category: str) -> int:
        with self._lock:
            return self._counts[category]

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def snapshot(self) -> Dict[str, int]:
        """Counts for every category (zeros included), in a fixed order"""
        with self._lock:
            return {category: self._counts[category] for category in CALL_CATEGORIES}

    def since(self, earlier: Dict[str, int]) -> Dict[str, int]:
        """Per-category difference against an earlier snapshot"""
        now = self.snapshot()
        return {category: now[category] - earlier.get(category, 0) for category in now}


@dataclass
class CommandRunMetrics:
    """Metrics for a single command run"""

    command: str  # spectrum, explore, validate, wishart
    timestamp: str
    duration_seconds: float
    model_calls: Dict[str, int]
    success: bool
    errors: List[str]
    output_dir: str


class MonitoringService:
    """Appends command run metrics to a JSON run log"""

    def __init__(self, metrics_file: Optional[Path] = None):
        self.metrics_file = metrics_file or Path("output/run_metrics.json")
        self.metrics_file.parent.mkdir(parents=True, exist_ok=True)

    def log_command_run(
        self,
        command: str,
        duration_seconds: float,
        model_calls: Dict[str, int],
        success: bool,
        errors: List[str],
        output_dir: str,
    ) -> None:
        """
        Log metrics for a command run

        Args:
            command: Command name (spectrum, explore, validate, wishart)
            duration_seconds: Wall-clock duration of the run
            model_calls: Simulate calls per category
            success: Whether the command succeeded
            errors: List of error messages
            output_dir: Directory the command wrote to
        """
        if command not in COMMANDS:
            logger.warning(f"Logging metrics for unknown command '{command}'")

        try:
            metrics = CommandRunMetrics(
                command=command,
                timestamp=datetime.now().isoformat(),
                duration_seconds=duration_seconds,
                model_calls=dict(model_calls),
                success=success,
                errors=list(errors),
                output_dir=str(output_dir),
            )

            all_metrics = self._load_metrics()
            all_metrics.append(asdict(metrics))
            self._save_metrics(all_metrics)

            logger.info(
                f"Logged {command} run: {sum(model_calls.values())} model calls, {duration_seconds:.1f}s"
            )

        except Exception as e:
            logger.error(f"Failed to log run metrics: {e}")

    def get_summary(self, command: Optional[str] = None) -> Dict:
        """
        Summarize logged runs, optionally for a single command

        Returns:
            Dictionary with run counts, total duration and model calls
        """
        runs = self._load_metrics()
        if command is not None:
            runs = [m for m in runs if m["command"] == command]

        calls = Counter()
        for metric in runs:
            calls.update(metric.get("model_calls", {}))

        return {
            "total_runs": len(runs),
            "successful_runs": sum(1 for m in runs if m["success"]),
            "failed_runs": sum(1 for m in runs if not m["success"]),
            "total_duration": round(sum(m["duration_seconds"] for m in runs), 1),
            "model_calls": dict(calls),
        }

    def _load_metrics(self) -> List[Dict]:
        """Load metrics from JSON file"""
        if not self.metrics_file.exists():
            return []

        try:
            with open(self.metrics_file, "r") as f:
                return json.load(f)
        except json.JSONDecodeError:
            logger.error(f"Corrupted metrics file: {self.metrics_file}")
            return []
        except Exception as e:
            logger.error(f"Failed to load metrics: {e}")
            return []

    def _save_metrics(self, metrics: List[Dict]) -> None:
        """Save metrics to JSON file"""
        try:
            with open(self.metrics_file, "w") as f:
                json.dump(metrics, f, indent=2)
        except Exception as e:
            logger.error(f"Failed to save metrics: {e}")
