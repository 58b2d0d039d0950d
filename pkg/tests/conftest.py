"""
Pytest configuration and shared fixtures for the PDC entanglement toolkit.
"""
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Add the repository root so `src` imports as a package
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.config import LEAKY_EPS_PAR, LEAKY_EPS_PERP  # noqa: E402
from src.counting.photon_stats import SourceModel  # noqa: E402
from src.optics.double_slit import SlitGeometry  # noqa: E402
from src.optics.polarization import Transmissions, make_state  # noqa: E402


@pytest.fixture
def temp_output_dir():
    """Temporary base directory for run artifacts."""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir)


@pytest.fixture
def maximal_state():
    """|HH> + |VV>."""
    return make_state(1.0)


@pytest.fixture
def produced_state():
    """Non-maximal state as produced by the two-crystal source."""
    return make_state(0.42)


@pytest.fixture
def ideal_eps():
    return Transmissions.ideal()


@pytest.fixture
def leaky_eps():
    """Polarizers passing 99% and leaking 1%."""
    return Transmissions.symmetric(LEAKY_EPS_PAR, LEAKY_EPS_PERP)


@pytest.fixture
def slit_geometry():
    """Experimental double slit without detector apertures."""
    return SlitGeometry(aperture1=0.0, aperture2=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def laser_source():
    return SourceModel(kind="coherent", mean_per_gate=0.1)


@pytest.fixture
def heralded_source():
    return SourceModel.preset("heralded")
