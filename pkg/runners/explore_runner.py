"""
Explore runner: drives one walk (or one per first orientation) and writes
walk JSONL traces plus summary.json
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional

from config.settings import DEFAULT_LOG_STEP
from models.model_api import SimulationModel
from models.model_factory import build_model
from parsers.walk_trace_formatter import WalkTraceFormatter
from services.explorer_service import WalkConfig, WalkTrace, run_walk
from services.monitoring_service import CallCounter
from services.run_config import RunConfig
from utils.errors import ConfigError
from utils.provenance import provenance_block, write_json

logger = logging.getLogger(__name__)


def walk_config_from(config: RunConfig, first_sign: Optional[int] = None) -> WalkConfig:
    walk = config.walk
    return WalkConfig(
        steps=walk.N,
        eps_min=walk.eps_min,
        eps=walk.eps,
        eps_max=walk.eps_max,
        simulation=config.simulation.to_simulation_config(),
        loss=config.loss,
        h=config.h if config.h is not None else DEFAULT_LOG_STEP,
        seed=config.seed,
        classify=walk.classify,
        first_sign=first_sign,
        random_sign=walk.random_sign,
    )


def summarize_trace(trace: WalkTrace, file_name: str) -> Dict:
    """Per-walk summary block"""
    labels = ([trace.origin_phase] if trace.origin_phase else []) + trace.phases
    return {
        "file": file_name,
        "steps": len(trace.steps),
        "aborted": trace.aborted,
        "phases": labels,
        "chosen": [step.chosen for step in trace.steps],
        "probabilities": [step.probability for step in trace.steps],
        "distances": [step.distance for step in trace.steps],
        "final_log": list(trace.points[-1]),
        "hessian_calls": trace.hessian_calls,
        "calls": {
            category: sum(step.calls.get(category, 0) for step in trace.steps)
            for category in ("hessian", "evaluation", "orientation")
        },
    }


class ExploreRunner:
    """Orchestrates the explore command"""

    def __init__(
        self,
        config: RunConfig,
        both_orientations: bool = False,
        resume: bool = False,
        model: Optional[SimulationModel] = None,
        counter: Optional[CallCounter] = None,
    ):
        if config.walk is None:
            raise ConfigError("walk", "section is required for explore")
        config.validate()
        self.config = config
        self.both_orientations = both_orientations
        self.resume = resume
        self.output_dir = Path(config.output_dir)

        self.model = model or build_model(config)
        self.counter = counter or CallCounter()

    def _walks(self) -> List[tuple]:
        """(file name, first-sign override) per walk"""
        if self.both_orientations:
            return [("walk_pos.jsonl", 1), ("walk_neg.jsonl", -1)]
        return [("walk.jsonl", None)]

    async def run(self) -> Dict:
        """
        Run the walk(s), appending each step to its JSONL file as it completes

        Returns:
            Dict with visited phases, per-walk summaries and model-call counts
        """
        origin = self.config.parameter_point()
        summaries = []
        start_calls = self.counter.snapshot()

        for file_name, first_sign in self._walks():
            formatter = WalkTraceFormatter(self.output_dir / file_name)
            if self.resume:
                done = formatter.load_for_resume()
            else:
                formatter.reset()
                done = []

            logger.info(
                f"Walk {file_name}: {self.config.walk.N} steps from {origin.as_dict()}"
                + (f", first sign {first_sign:+d}" if first_sign else "")
            )
            trace = await run_walk(
                self.model,
                origin,
                walk_config_from(self.config, first_sign),
                self.config.workers,
                self.counter,
                resume_steps=done,
                on_step=formatter.append,
            )
            summaries.append(summarize_trace(trace, file_name))

        visited = sorted({label for summary in summaries for label in summary["phases"]})
        summary = {
            "command": "explore",
            "parameter_names": list(origin.names),
            "origin_log": origin.log.tolist(),
            "walks": summaries,
            "visited_phases": visited,
            "hessian_calls": sum(s["hessian_calls"] for s in summaries),
            "provenance": provenance_block(self.config.to_dict(), self.config.seed),
        }
        summary["step_model_calls"] = {
            category: sum(s["calls"][category] for s in summaries)
            for category in ("hessian", "evaluation", "orientation")
        }
        # Every simulate call of this invocation, baselines and resume recomputation included
        calls = self.counter.since(start_calls)
        summary["model_calls"] = {category: count for category, count in calls.items() if count}
        summary["total_model_calls"] = sum(calls.values())

        write_json(summary, self.output_dir / "summary.json")
        logger.info(f"Visited phases: {visited or 'n/a (no classifier)'}")

        return {
            "status": "aborted" if any(s["aborted"] for s in summaries) else "success",
            "visited_phases": visited,
            "walks": summaries,
            "model_calls": self.counter.snapshot(),
        }
