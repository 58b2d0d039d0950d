"""
Unit tests for the counting statistics engine.
"""
import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from src.config import RUNS_TEST_LEVEL
from src.counting.statistics import (
    FitReport,
    RateConfig,
    accidental_rate,
    chi2_fit,
    pattern_basis,
    poisson_sigma,
    polynomial_basis,
    runs_test,
    significance,
    simulate_accidental_rate,
)
from src.optics.double_slit import synthetic_counts
from src.utils import InvalidInputError

FIXED_X2 = -0.01
X1 = np.linspace(-0.03, 0.03, 60)


def fit_frame(counts: pd.DataFrame) -> pd.DataFrame:
    return counts.rename(columns={"x_m": "x"})[["x", "count", "sigma"]]


class TestAccidentals:
    """Tests for chance coincidences"""

    def test_product_formula(self):
        """Test rate1 x rate2 x window for 100 kHz singles and 7 ns."""
        assert accidental_rate(RateConfig(rate1=1e5, rate2=1e5, window=7e-9)) == pytest.approx(70.0)

    def test_sub_hertz_example(self):
        """Test the 0.07 Hz case of 10 kHz and 1 kHz singles."""
        assert accidental_rate(RateConfig(rate1=1e4, rate2=1e3, window=7e-9)) == pytest.approx(0.07)

    def test_zero_window(self):
        """Test that a zero window gives no accidentals."""
        assert accidental_rate(RateConfig(rate1=1e5, rate2=1e5, window=0.0)) == 0.0

    def test_bilinear(self):
        """Test linearity in each singles rate."""
        base = accidental_rate(RateConfig(rate1=2e4, rate2=3e4, window=1e-8))
        doubled = accidental_rate(RateConfig(rate1=4e4, rate2=3e4, window=1e-8))
        assert doubled == pytest.approx(2 * base)

    def test_non_positive_rate_rejected(self):
        """Test rejection of a zero singles rate."""
        with pytest.raises(ValidationError):
            RateConfig(rate1=0.0, rate2=1e5, window=1e-9)

    def test_monte_carlo_agrees(self):
        """Test arrival-time simulation against the product formula."""
        rc = RateConfig(rate1=1e6, rate2=1e6, window=1e-8, duration=1.0)
        simulated = simulate_accidental_rate(rc, seed=3)
        assert simulated == pytest.approx(accidental_rate(rc), rel=0.05)


class TestSignificance:
    """Tests for significance and Poisson errors"""

    def test_values(self):
        """Test value over sigma for the quoted count examples."""
        assert significance(513, 25) == pytest.approx(20.52)
        assert significance(78, 10) == pytest.approx(7.8)
        assert significance(0, 1) == 0.0

    def test_non_positive_sigma(self):
        """Test rejection of a non-positive sigma."""
        with pytest.raises(InvalidInputError):
            significance(1.0, 0.0)

    def test_poisson_sigma_floor(self):
        """Test sqrt(count) with a floor of one."""
        assert poisson_sigma(0) == 1.0
        assert poisson_sigma(100) == 10.0
        assert np.allclose(poisson_sigma([0, 4, 9]), [1.0, 2.0, 3.0])


class TestChi2Fit:
    """Tests for weighted least-squares fits"""

    def test_noiseless_data_fit_exactly(self):
        """Test an exact straight-line fit."""
        x = np.linspace(0, 1, 10)
        data = pd.DataFrame({"x": x, "count": 3.0 + 2.0 * x, "sigma": np.ones_like(x)})
        report = chi2_fit(data, polynomial_basis(1))
        assert report.chi2 == pytest.approx(0.0, abs=1e-18)
        assert report.params == pytest.approx([3.0, 2.0])
        assert report.dof == 8
        assert not report.rejected_at_5pct

    def test_true_model_reduced_chi2(self, slit_geometry):
        """Test reduced chi2 near 1 for the generating model."""
        basis = pattern_basis(slit_geometry, FIXED_X2)
        good = 0
        for seed in range(200):
            data = fit_frame(synthetic_counts(slit_geometry, FIXED_X2, X1, 1000, 200, seed))
            if 0.5 <= chi2_fit(data, basis).chi2_reduced <= 1.5:
                good += 1
        assert good >= 190

    def test_linear_model_rejected_for_fringes(self, slit_geometry):
        """Test rejection of a straight line through fringes."""
        for seed in range(20):
            data = fit_frame(synthetic_counts(slit_geometry, FIXED_X2, X1, 1000, 200, seed))
            report = chi2_fit(data, polynomial_basis(1))
            assert report.rejected_at_5pct
            assert report.chi2_reduced > 10

    def test_recovers_amplitude_and_offset(self, slit_geometry):
        """Test recovery of the generating amplitude and offset."""
        data = fit_frame(synthetic_counts(slit_geometry, FIXED_X2, X1, 1000, 200, seed=11))
        report = chi2_fit(data, pattern_basis(slit_geometry, FIXED_X2))
        amplitude, offset = report.params
        assert amplitude == pytest.approx(1000, abs=5 * report.param_sigmas[0])
        assert offset == pytest.approx(200, abs=5 * report.param_sigmas[1])

    def test_rescaling_invariance(self, slit_geometry):
        """Test chi2 invariance under joint scaling of counts and sigmas."""
        data = fit_frame(synthetic_counts(slit_geometry, FIXED_X2, X1, 1000, 200, seed=5))
        scaled = data.assign(count=data["count"] * 3.0, sigma=data["sigma"] * 3.0)
        basis = pattern_basis(slit_geometry, FIXED_X2)
        assert chi2_fit(scaled, basis).chi2 == pytest.approx(chi2_fit(data, basis).chi2, rel=1e-9)

    def test_singular_design_rejected(self):
        """Test rejection of a rank-deficient design."""
        data = pd.DataFrame({"x": [1.0] * 5, "count": [1, 2, 3, 4, 5], "sigma": [1.0] * 5})
        with pytest.raises(InvalidInputError):
            chi2_fit(data, polynomial_basis(1))

    def test_too_few_points(self):
        """Test rejection of fits with no degrees of freedom."""
        data = pd.DataFrame({"x": [0.0, 1.0], "count": [1, 2], "sigma": [1.0, 1.0]})
        with pytest.raises(InvalidInputError):
            chi2_fit(data, polynomial_basis(1))

    def test_non_positive_sigma(self):
        """Test rejection of a non-positive sigma."""
        data = pd.DataFrame({"x": [0.0, 1.0, 2.0], "count": [1, 2, 3], "sigma": [1.0, 0.0, 1.0]})
        with pytest.raises(InvalidInputError):
            chi2_fit(data, polynomial_basis(0))

    def test_report_consistency_enforced(self):
        """Test that the report checks chi2_reduced = chi2 / dof."""
        with pytest.raises(ValidationError):
            FitReport(params=[1.0], param_sigmas=[0.1], chi2=10.0, dof=5, chi2_reduced=1.0,
                      p_value=0.1, rejected_at_5pct=False)


class TestRunsTest:
    """Tests for the sign-runs residual check"""

    def test_alternating_signs_have_many_runs(self):
        """Test a significant excess of sign runs."""
        z, p = runs_test([1, -1] * 20)
        assert z > 0
        assert p < RUNS_TEST_LEVEL

    def test_blocked_signs_have_few_runs(self):
        """Test a significant deficit of sign runs."""
        z, p = runs_test([1] * 20 + [-1] * 20)
        assert z < 0
        assert p < RUNS_TEST_LEVEL

    def test_single_sign(self):
        """Test the undefined result when one sign is absent."""
        assert runs_test([1.0, 2.0, 3.0]) == (0.0, None)

    def test_correct_model_residuals_pass(self, slit_geometry):
        """Test that residuals of the generating model look random."""
        basis = pattern_basis(slit_geometry, FIXED_X2)
        passed = 0
        for seed in range(100):
            data = fit_frame(synthetic_counts(slit_geometry, FIXED_X2, X1, 1000, 200, seed))
            _, p = runs_test(chi2_fit(data, basis).residuals)
            if p is None or p >= RUNS_TEST_LEVEL:
                passed += 1
        assert passed >= 95
