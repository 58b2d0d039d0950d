"""
Unit tests for two-photon double-slit interference.
"""
import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from src.config import SAME_SEMIPLANE_X1_M, SAME_SEMIPLANE_X2_M
from src.optics.double_slit import (
    SlitGeometry,
    coincidence_pattern,
    count_fringe_period,
    diffraction_g,
    fringe_period,
    pattern_scan,
    single_marginal,
    synthetic_counts,
)
from src.utils import InvalidInputError


class TestSlitGeometry:
    """Tests for the geometry descriptor"""

    def test_defaults(self):
        """Test the experimental geometry defaults."""
        geom = SlitGeometry()
        assert geom.separation_s == pytest.approx(100e-6)
        assert geom.k == pytest.approx(2 * math.pi / 702e-9)

    def test_separation_must_exceed_width(self):
        """Test rejection of slits wider than their separation."""
        with pytest.raises(ValidationError):
            SlitGeometry(separation_s=10e-6, width_w=10e-6)

    def test_grazing_incidence_rejected(self):
        """Test rejection of incidence at 90 degrees."""
        with pytest.raises(ValidationError):
            SlitGeometry(incidence_A=math.pi / 2)


class TestDiffraction:
    """Tests for the single-slit envelope"""

    def test_unity_at_centre(self, slit_geometry):
        """Test g = 1 straight through the slit."""
        assert diffraction_g(0.0, 0.0, slit_geometry) == 1.0

    def test_first_zero(self, slit_geometry):
        """Test the first diffraction zero at sin(theta) = lambda / w."""
        theta = math.asin(slit_geometry.wavelength / slit_geometry.width_w)
        assert diffraction_g(theta, 0.0, slit_geometry) == pytest.approx(0.0, abs=1e-12)

    def test_incidence_shifts_centre(self, slit_geometry):
        """Test that the envelope centre follows the incidence angle."""
        assert diffraction_g(0.01, 0.01, slit_geometry) == pytest.approx(1.0)

    def test_grazing_angle_rejected(self, slit_geometry):
        """Test rejection of detection angles at 90 degrees."""
        with pytest.raises(InvalidInputError):
            diffraction_g(math.pi / 2, 0.0, slit_geometry)


class TestCoincidencePattern:
    """Tests for the fourth-order pattern"""

    def test_fringe_period_by_peak_counting(self, slit_geometry):
        """Test a measured fringe period of lambda L / s."""
        scan = pattern_scan(slit_geometry, 0.0, np.linspace(-0.02, 0.02, 4001))
        expected = fringe_period(slit_geometry)
        assert expected == pytest.approx(8.494e-3, rel=1e-3)
        assert count_fringe_period(scan) == pytest.approx(expected, rel=0.02)

    def test_same_semiplane_coincidences(self, slit_geometry):
        """Test strictly positive coincidences with both detectors on one side."""
        value = coincidence_pattern(slit_geometry, SAME_SEMIPLANE_X1_M, SAME_SEMIPLANE_X2_M)
        assert value > 0.0
        with_iris = coincidence_pattern(SlitGeometry(), SAME_SEMIPLANE_X1_M, SAME_SEMIPLANE_X2_M)
        assert with_iris > 0.0

    def test_non_negative_over_random_geometries(self, rng):
        """Test C >= 0 over random geometries."""
        for _ in range(10_000):
            width = rng.uniform(1e-6, 50e-6)
            geom = SlitGeometry(
                separation_s=width + rng.uniform(1e-6, 500e-6),
                width_w=width,
                wavelength=rng.uniform(300e-9, 1500e-9),
                incidence_A=rng.uniform(-0.3, 0.3),
                incidence_B=rng.uniform(-0.3, 0.3),
                det1_distance=rng.uniform(0.2, 3.0),
                det2_distance=rng.uniform(0.2, 3.0),
                aperture1=rng.uniform(0, 5e-3),
                aperture2=rng.uniform(0, 5e-3),
            )
            x1, x2 = rng.uniform(-0.1, 0.1, 2)
            assert coincidence_pattern(geom, x1, x2) >= -1e-12

    def test_detector_swap_symmetry(self, rng):
        """Test symmetry under exchanging the two detectors."""
        geom = SlitGeometry(incidence_A=0.02, incidence_B=-0.01, aperture1=1e-3, aperture2=3e-3)
        for x1, x2 in rng.uniform(-0.05, 0.05, (20, 2)):
            assert coincidence_pattern(geom, x1, x2) == pytest.approx(
                coincidence_pattern(geom.swapped(), x2, x1), rel=1e-12, abs=1e-15)

    def test_narrow_slit_limit_is_pure_fringe(self):
        """Test pure cos^2 fringes for very narrow slits."""
        geom = SlitGeometry(width_w=1e-10, aperture1=0.0, aperture2=0.0)
        x1 = np.linspace(-0.02, 0.02, 201)
        scan = pattern_scan(geom, 0.0, x1)
        phase = geom.k * geom.separation_s * np.sin(np.arctan(x1 / geom.det1_distance))
        expected = 0.5 * (1.0 + np.cos(phase))
        assert np.allclose(scan["coincidence_norm"], expected / expected.max(), atol=1e-6)

    def test_aperture_averaging_lowers_contrast(self, slit_geometry):
        """Test that a finite iris lowers fringe contrast."""
        x1 = np.linspace(-0.01, 0.01, 801)
        point = pattern_scan(slit_geometry, 0.0, x1)["coincidence"]
        wide = pattern_scan(slit_geometry.model_copy(update={"aperture1": 6e-3}), 0.0, x1)["coincidence"]
        assert wide.min() / wide.max() > point.min() / point.max()

    def test_single_detector_signal_is_flat(self, slit_geometry):
        """Test that one detector alone shows no two-slit fringes."""
        x2 = np.linspace(-0.3, 0.3, 20001)
        for x1 in (0.0, 0.0021, 0.005):
            full, envelopes = single_marginal(slit_geometry, x1, x2)
            assert full == pytest.approx(envelopes, rel=0.01)


class TestScans:
    """Tests for scans and synthetic data"""

    def test_scan_normalized(self, slit_geometry):
        """Test scan columns and a unit maximum after normalization."""
        scan = pattern_scan(slit_geometry, -0.01, np.linspace(-0.03, 0.03, 61))
        assert list(scan.columns) == ["x1_m", "x2_m", "coincidence", "coincidence_norm"]
        assert scan["coincidence_norm"].max() == pytest.approx(1.0)

    def test_empty_scan_rejected(self, slit_geometry):
        """Test rejection of an empty position range."""
        with pytest.raises(InvalidInputError):
            pattern_scan(slit_geometry, 0.0, [])

    def test_period_undefined_without_fringes(self):
        """Test that a fringe-free scan has no period."""
        flat = pd.DataFrame({"x1_m": [0.0, 1.0, 2.0], "coincidence": [1.0, 1.0, 1.0]})
        assert count_fringe_period(flat) is None

    def test_synthetic_counts_deterministic(self, slit_geometry):
        """Test identical synthetic counts for identical seeds."""
        x1 = np.linspace(-0.03, 0.03, 61)
        a = synthetic_counts(slit_geometry, -0.01, x1, 1000, 200, seed=7)
        b = synthetic_counts(slit_geometry, -0.01, x1, 1000, 200, seed=7)
        pd.testing.assert_frame_equal(a, b)
        assert (a["sigma"] >= 1).all()
        assert a["expected"].max() == pytest.approx(1200)
