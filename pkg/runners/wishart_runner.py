"""
Wishart runner: null-model eigenvalue samples for comparison with a model spectrum
"""

import logging
from pathlib import Path
from typing import Dict

from config.settings import WISHART_SUPPORT_WIDEN
from parsers.csv_formatter import WishartCSVFormatter
from services.spectral_service import (
    fraction_inside_support,
    marchenko_pastur_support,
    wishart_null,
)
from utils.errors import ConfigError
from utils.provenance import provenance_block, write_json

logger = logging.getLogger(__name__)


class WishartRunner:
    """Orchestrates the wishart command"""

    def __init__(self, dimension: int, samples: int, trials: int, seed: int, output_dir: str):
        if dimension < 1:
            raise ConfigError("wishart.dimension", f"must be >= 1 (got {dimension})")
        if samples < dimension:
            raise ConfigError(
                "wishart.samples", f"must be >= dimension (got M={samples}, P={dimension})"
            )
        if trials < 1:
            raise ConfigError("wishart.trials", f"must be >= 1 (got {trials})")

        self.dimension = dimension
        self.samples = samples
        self.trials = trials
        self.seed = seed
        self.output_dir = Path(output_dir)
        self.csv_formatter = WishartCSVFormatter(self.output_dir / "wishart_null.csv")

    async def run(self) -> Dict:
        """Write wishart_null.csv and report.json"""
        P, M = self.dimension, self.samples
        eigenvalues = wishart_null(P, M, self.trials, self.seed)
        lower, upper = marchenko_pastur_support(P, M)
        inside = fraction_inside_support(eigenvalues, P, M, WISHART_SUPPORT_WIDEN)

        self.csv_formatter.write(eigenvalues, P)
        settings = {"P": P, "M": M, "trials": self.trials, "seed": self.seed}
        report = {
            "command": "wishart",
            "settings": settings,
            "count": int(len(eigenvalues)),
            "support": [lower, upper],
            "widen": WISHART_SUPPORT_WIDEN,
            "fraction_inside": inside,
            "provenance": provenance_block(settings, self.seed),
        }
        write_json(report, self.output_dir / "report.json")

        logger.info(
            f"Wishart null P={P} M={M}: {len(eigenvalues)} eigenvalues, "
            f"{inside:.2%} inside [{lower:.3f}, {upper:.3f}] +/- {WISHART_SUPPORT_WIDEN}"
        )
        return {"status": "success", "count": int(len(eigenvalues)), "fraction_inside": inside}
