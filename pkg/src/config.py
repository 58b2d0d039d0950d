"""
Configuration management for the PDC entanglement toolkit.
Loads overrides from environment variables (prefix PDC_) with sensible defaults,
and holds the physical constants quoted by the source experiments.
"""

import logging
from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict
from pythonjsonlogger import jsonlogger

# Project root
PROJECT_ROOT = Path(__file__).parent.parent

load_dotenv(PROJECT_ROOT / ".env")


class ToolkitSettings(BaseSettings):
    """Environment-level settings (PDC_OUTPUT_DIR, PDC_LOG_LEVEL, ...)."""

    model_config = SettingsConfigDict(env_prefix="PDC_", extra="ignore")

    output_dir: Path = PROJECT_ROOT / "runs"
    log_level: str = "INFO"
    log_json: bool = False
    n_jobs: int = 1


settings = ToolkitSettings()

# Output paths
OUTPUT_DIR = settings.output_dir
N_JOBS = settings.n_jobs
TOOLKIT_VERSION = "1.0.0"
CONFIG_VERSION = "1"

# Entangled source (two type I crystals, |HH> + f|VV>)
SIGNAL_WAVELENGTH_M = 789e-9
IDLER_WAVELENGTH_M = 633e-9
MEAN_WAVELENGTH_M = 0.5 * (SIGNAL_WAVELENGTH_M + IDLER_WAVELENGTH_M)

# CH optimisation
GRID_STEP_DEG = 3.0
REFINE_RESOLUTION_DEG = 0.01
OPTIMUM_TOLERANCE = 1e-7
CH_CONTOUR_LEVELS = [0.0, 0.05, 0.1, 0.15, 0.2]
LEAKY_EPS_PAR = 0.99
LEAKY_EPS_PERP = 0.01
CRITICAL_EFFICIENCY_XTOL = 1e-4

# Santos-model detection floor inputs (SI units)
SANTOS_ETA = 0.51
SANTOS_FOCAL_M = 0.009
SANTOS_ACTIVE_RADIUS_M = 0.001
SANTOS_DISTANCE_M = 0.75
SANTOS_COHERENCE_S = 4.2e-13
SANTOS_DEPTH_M = 3e-5
SANTOS_ABSORB_S = 1.0

# Double slit
SLIT_SEPARATION_M = 100e-6
SLIT_WIDTH_M = 10e-6
SLIT_WAVELENGTH_M = 702e-9
DET1_DISTANCE_M = 1.21
DET2_DISTANCE_M = 1.5
IRIS_APERTURE_M = 2e-3
APERTURE_SAMPLES = 21
SAME_SEMIPLANE_X1_M = -0.017
SAME_SEMIPLANE_X2_M = -0.055
SCAN_FIXED_X2_M = -0.01

# Gated photon counting
GATE_WIDTH_S = 7e-9
PULSER_RATE_HZ = 65e3
LAMP_MODE_COUNT = 1000
SIM_CHUNK_GATES = 250_000
BOOTSTRAP_RESAMPLES = 500

# Counting statistics
CHI2_REJECT_LEVEL = 0.05
RUNS_TEST_LEVEL = 0.01

# Logging
LOG_LEVEL = settings.log_level
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(name: str) -> logging.Logger:
    """Setup logging for a module."""
    logger = logging.getLogger(name)
    logger.setLevel(LOG_LEVEL)

    if not logger.handlers:
        handler = logging.StreamHandler()
        if settings.log_json:
            formatter = jsonlogger.JsonFormatter(LOG_FORMAT)
        else:
            formatter = logging.Formatter(LOG_FORMAT)
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.propagate = False

    return logger
