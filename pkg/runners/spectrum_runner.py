"""
Spectrum runner: Fisher matrix, eigendecomposition and axis alignment at one point
"""

import logging
from pathlib import Path
from typing import Dict, Optional

from models.model_api import SimulationModel, dump_ensemble_csv
from models.model_factory import build_model
from parsers.csv_formatter import FisherCSVFormatter, SpectrumCSVFormatter
from services.fisher_service import estimate_fisher
from services.monitoring_service import CallCounter
from services.run_config import RunConfig
from services.spectral_service import axis_similarity, eigendecompose, stiffness_scale
from utils.provenance import provenance_block, write_json

logger = logging.getLogger(__name__)


class SpectrumRunner:
    """Orchestrates the spectrum command"""

    def __init__(
        self,
        config: RunConfig,
        model: Optional[SimulationModel] = None,
        counter: Optional[CallCounter] = None,
    ):
        # Validate and store configuration
        config.validate()
        self.config = config
        self.output_dir = Path(config.output_dir)

        # Initialize services with dependency injection
        self.model = model or build_model(config)
        self.counter = counter or CallCounter()
        self.fisher_formatter = FisherCSVFormatter(self.output_dir / "fisher.csv")
        self.spectrum_formatter = SpectrumCSVFormatter(self.output_dir / "spectrum.csv")

    async def run(self) -> Dict:
        """
        Estimate the Fisher matrix and write fisher.csv, spectrum.csv, report.json

        Returns:
            Dict with eigenvalues, written files and model-call counts
        """
        params = self.config.parameter_point()
        simulation = self.config.simulation.to_simulation_config()
        logger.info(
            f"Spectrum at {params.as_dict()} ({self.config.loss.kind} loss, "
            f"S={simulation.seed_count}, T={simulation.steps}, T_eq={simulation.equilibration})"
        )

        fisher, baseline = await estimate_fisher(
            self.model,
            params,
            simulation,
            self.config.loss,
            self.config.h,
            self.config.mode,
            self.config.workers,
            self.counter,
        )
        spectrum = eigendecompose(fisher)
        similarity = axis_similarity(spectrum)

        files = [
            self.fisher_formatter.write(fisher),
            self.spectrum_formatter.write(spectrum, similarity),
        ]
        if self.config.dump_ensembles:
            files.extend(dump_ensemble_csv(baseline, self.output_dir / "ensembles"))

        report = {
            "command": "spectrum",
            "parameters": params.as_dict(),
            "eigenvalues": spectrum.eigenvalues.tolist(),
            "ratios": spectrum.ratios.tolist(),
            "similarity": list(similarity.similarity),
            "best_axis": similarity.best_axis_names(),
            "stiffness_scale": [
                stiffness_scale(value) if value > 0 else None for value in spectrum.eigenvalues
            ],
            "fisher": fisher.to_dict(),
            "model_calls": self.counter.snapshot(),
            "provenance": provenance_block(self.config.to_dict(), self.config.seed),
        }
        report_file = self.output_dir / "report.json"
        write_json(report, report_file)
        files.append(report_file)

        logger.info(
            f"Leading eigenvalue {spectrum.eigenvalues[0]:.4g}; "
            f"smallest ratio {spectrum.ratios[-1]:.3e}"
        )
        return {
            "status": "success",
            "eigenvalues": spectrum.eigenvalues.tolist(),
            "files": [str(f) for f in files],
            "model_calls": self.counter.snapshot(),
        }
