"""
Walk trace JSONL persistence: one JSON object per step, appendable and resumable
"""

import json
import logging
from pathlib import Path
from typing import List

from services.explorer_service import WalkStep

logger = logging.getLogger(__name__)


class WalkTraceFormatter:
    """Appends walk steps to a JSONL file as they complete"""

    def __init__(self, output_file: str):
        self.output_file = Path(output_file)
        self.output_file.parent.mkdir(parents=True, exist_ok=True)

    def reset(self) -> None:
        self.output_file.write_text("", encoding="utf-8")

    def append(self, step: WalkStep) -> None:
        line = json.dumps(step.to_dict(), sort_keys=True)
        with open(self.output_file, "a", encoding="utf-8", newline="\n") as f:
            f.write(line + "\n")
            f.flush()

    def read_steps(self) -> List[WalkStep]:
        """All complete steps; a torn last line is ignored"""
        steps, _ = self._parse()
        return steps

    def load_for_resume(self) -> List[WalkStep]:
        """
        Read complete steps and truncate the file after the last one

        Returns:
            Steps to hand to run_walk as resume_steps
        """
        if not self.output_file.exists():
            return []

        steps, valid_bytes = self._parse()
        size = self.output_file.stat().st_size
        if valid_bytes < size:
            logger.warning(
                f"Discarding {size - valid_bytes} bytes of incomplete data at the end of {self.output_file}"
            )
            with open(self.output_file, "r+b") as f:
                f.truncate(valid_bytes)
        logger.info(f"Loaded {len(steps)} completed steps from {self.output_file}")
        return steps

    def _parse(self) -> tuple:
        if not self.output_file.exists():
            return [], 0

        steps = []
        valid_bytes = 0
        with open(self.output_file, "rb") as f:
            raw = f.read()

        # The last piece is either empty or an unterminated line
        for chunk in raw.split(b"\n")[:-1]:
            try:
                step = WalkStep.from_dict(json.loads(chunk.decode("utf-8")))
            except (ValueError, KeyError, TypeError):
                break
            if step.index != len(steps):
                break
            steps.append(step)
            valid_bytes += len(chunk) + 1
        return steps, valid_bytes
