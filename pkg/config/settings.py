"""
Configuration settings for the sloppy phase explorer
"""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file in config folder
config_dir = Path(__file__).parent
load_dotenv(config_dir / ".env")

# Project paths
PROJECT_ROOT = Path(__file__).parent.parent
CONFIG_DIR = PROJECT_ROOT / "config"
EXAMPLES_DIR = CONFIG_DIR / "examples"
SCRIPTS_DIR = PROJECT_ROOT / "scripts"
OUTPUT_DIR = Path(os.getenv("SLOPPY_OUTPUT_DIR", str(PROJECT_ROOT / "output")))

VERSION = "0.3.0"

# Parallelism
DEFAULT_WORKERS = int(os.getenv("SLOPPY_WORKERS", "4"))

# Commands
COMMANDS = ["spectrum", "explore", "validate", "wishart"]

# Exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_MODEL_FAILURE = 3
EXIT_VALIDATION_FAILURE = 4

# Differentiation
DEFAULT_LOG_STEP = 0.1  # ABM-like models
LINEAR_STEP_SCALE = 1e-4  # h_i = scale * max(1, |theta_i|)

# Simulation defaults
DEFAULT_SEEDS = 20
DEFAULT_STEPS = 512
DEFAULT_EQUILIBRATION = 0

# Loss defaults
DEFAULT_LOSS_KIND = "mse"
DEFAULT_NORMALIZATION = "mean"
HISTOGRAM_BINS = 64
HISTOGRAM_PSEUDO_COUNT = 0.5  # Jeffreys-style per-bin smoothing
HISTOGRAM_RANGE_EXPANSION = 0.1  # 10% of the pooled range on each side
DEGENERATE_RANGE_HALF_WIDTH = 0.5  # used when all samples are equal

# Numerical tolerances
SYMMETRY_TOLERANCE = 1e-10
EIGENVALUE_TIE_TOLERANCE = 1e-12

# Exploration walk (log-space distances)
WALK_EPS_MIN = 0.3
WALK_EPS = 0.1
WALK_EPS_MAX = 1.0
SIGN_FIX_ANGLE_DEGREES = 165.0
DEFAULT_WALK_STEPS = 8

# Phase classifier thresholds (synthetic regime model)
PHASE_HIGH_MEAN = 0.7
PHASE_LOW_MEAN = 0.15
PHASE_OSC_STD = 0.15
PHASE_MIN_SERIES_LENGTH = 128

# Validation study (polynomial / Hilbert)
HILBERT_DEGREE = 3
HILBERT_DEGREES = [2, 3, 4, 5]  # parameter-count axis: P = degree + 1
HILBERT_METHODS = ["jacobian", "direct"]
HILBERT_GRID_SIZES = [125, 250, 500, 1000, 2000]
HILBERT_NOISE_LEVELS = [0.0, 0.1]
HILBERT_SEED_COUNTS = [1, 20]
HILBERT_THRESHOLD = 1e-3
HILBERT_NOISE_THRESHOLD = 1e-2
HILBERT_COEFFICIENT = 1.0  # any point: the model is linear in p
HILBERT_NOISY_STEP = 1.0  # linear step of the unmatched-seed noisy estimate

# Wishart null defaults
WISHART_DIMENSION = 8
WISHART_SAMPLES = 64
WISHART_TRIALS = 200
WISHART_SUPPORT_WIDEN = 0.1

# External model
EXTERNAL_TIMEOUT_SECONDS = 600.0

# CSV Configuration
CSV_ENCODING = "utf-8"

# Logging Configuration
LOG_LEVEL = os.getenv("SLOPPY_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# Settings object for easier import
class Settings:
    """Settings object for convenient access to configuration values"""

    # Paths
    project_root = PROJECT_ROOT
    config_dir = CONFIG_DIR
    examples_dir = EXAMPLES_DIR
    output_dir = OUTPUT_DIR

    # Runtime
    workers = DEFAULT_WORKERS
    log_level = LOG_LEVEL
    version = VERSION


settings = Settings()
