"""
Unit tests for the two-photon polarization model.
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.optics.polarization import (
    AnalyzerSetting,
    Transmissions,
    bell_state,
    coincidence_law,
    coincidence_prob,
    fringe_scan,
    make_state,
    single_prob,
    visibility,
)
from src.utils import InvalidInputError


def projection_oracle(f, theta1, theta2, eps1, eps2, alignment=1.0):
    """Brute-force detection probability from the two-photon amplitude vector."""
    norm = 1.0 / (1.0 + abs(f) ** 2)

    def projectors(theta, eps):
        par, perp = eps
        # pass and leak axes in (H, V) components
        return [(math.sqrt(par), np.array([math.sin(theta), math.cos(theta)])),
                (math.sqrt(perp), np.array([math.cos(theta), -math.sin(theta)]))]

    coherent = 0.0
    incoherent = 0.0
    for t1, u in projectors(theta1, eps1):
        for t2, v in projectors(theta2, eps2):
            hh = t1 * t2 * u[0] * v[0]
            vv = t1 * t2 * u[1] * v[1] * f
            coherent += abs(hh + vv) ** 2
            incoherent += abs(hh) ** 2 + abs(vv) ** 2
    return norm * (alignment * coherent + (1 - alignment) * incoherent)


class TestEntangledState:
    """Tests for the state descriptor"""

    def test_negative_f_rejected(self):
        """Test rejection of a negative |f|."""
        with pytest.raises(InvalidInputError):
            make_state(-0.1)

    def test_phase_wrapped(self):
        """Test wrapping of the phase of f to [0, 2 pi)."""
        state = make_state(1.0, -math.pi / 2)
        assert state.f_phase == pytest.approx(1.5 * math.pi)

    def test_amplitudes_normalized(self):
        """Test that the HH and VV amplitudes are normalized."""
        state = make_state(0.4, 0.3)
        assert np.sum(np.abs(state.amplitudes()) ** 2) == pytest.approx(1.0, abs=1e-12)

    def test_weights(self):
        """Test equal weights for the maximal state."""
        state = make_state(1.0)
        assert state.weights == pytest.approx((0.5, 0.5))

    def test_bell_states(self):
        """Test the four Bell states and their arm-2 offsets."""
        phi_minus, offset = bell_state("phi_minus")
        assert phi_minus.f.real == pytest.approx(-1.0)
        assert offset == 0.0
        _, psi_offset = bell_state("psi_plus")
        assert psi_offset == pytest.approx(math.pi / 2)
        with pytest.raises(InvalidInputError):
            bell_state("chi")


class TestAnalyzer:
    """Tests for analyzer settings and transmissions"""

    def test_leak_above_pass_rejected(self):
        """Test rejection of a leak larger than the pass transmission."""
        with pytest.raises(ValidationError):
            AnalyzerSetting(theta=0.0, eps_par=0.5, eps_perp=0.6)
        with pytest.raises(ValidationError):
            Transmissions(eps1_par=0.5, eps1_perp=0.6)

    def test_open_analyzer_passes_everything(self):
        """Test that a removed analyzer passes both polarizations."""
        assert AnalyzerSetting.open().effective == (1.0, 1.0)

    def test_invalid_arm(self):
        """Test rejection of an arm other than 1 or 2."""
        with pytest.raises(InvalidInputError):
            Transmissions.ideal().analyzer(3, 0.0)


class TestCoincidenceLaw:
    """Tests for the closed-form coincidence probability"""

    def test_matches_projection_oracle(self, rng):
        """Test the closed form against amplitude projection on random inputs."""
        for _ in range(1000):
            f = rng.uniform(0, 3) * np.exp(1j * rng.uniform(0, 2 * math.pi))
            t1, t2 = rng.uniform(0, math.pi, 2)
            par1, par2 = rng.uniform(0.5, 1.0, 2)
            eps1 = (par1, rng.uniform(0, par1))
            eps2 = (par2, rng.uniform(0, par2))
            expected = projection_oracle(f, t1, t2, eps1, eps2)
            assert coincidence_law(f, t1, t2, eps1, eps2) == pytest.approx(expected, abs=1e-10)

    def test_partial_alignment_matches_oracle(self, rng):
        """Test the partially coherent mixture against the oracle."""
        for alignment in (0.0, 0.3, 0.8):
            f = 0.7 + 0.2j
            expected = projection_oracle(f, 0.4, 1.1, (0.9, 0.05), (0.95, 0.02), alignment)
            got = coincidence_law(f, 0.4, 1.1, (0.9, 0.05), (0.95, 0.02), alignment)
            assert got == pytest.approx(expected, abs=1e-12)

    def test_maximal_state_malus(self, maximal_state):
        """Test parallel and crossed analyzers on the maximal state."""
        a1 = AnalyzerSetting(theta=math.radians(30))
        a2 = AnalyzerSetting(theta=math.radians(30))
        assert coincidence_prob(maximal_state, a1, a2) == pytest.approx(0.5, abs=1e-12)
        crossed = AnalyzerSetting(theta=math.radians(120))
        assert coincidence_prob(maximal_state, a1, crossed) == pytest.approx(0.0, abs=1e-12)

    def test_completeness(self, rng):
        """Test that the four pass/block outcomes sum to one."""
        for _ in range(50):
            state = make_state(rng.uniform(0, 2), rng.uniform(0, 2 * math.pi))
            t1, t2 = rng.uniform(0, math.pi, 2)
            total = sum(
                coincidence_prob(state, AnalyzerSetting(theta=a), AnalyzerSetting(theta=b))
                for a in (t1, t1 + math.pi / 2) for b in (t2, t2 + math.pi / 2)
            )
            assert total == pytest.approx(1.0, abs=1e-12)

    def test_no_signaling(self, rng):
        """Test that the arm-1 marginal ignores ten arm-2 settings."""
        for _ in range(50):
            state = make_state(rng.uniform(0, 2), rng.uniform(0, 2 * math.pi))
            t1 = rng.uniform(0, math.pi)
            a1 = AnalyzerSetting(theta=t1)
            marginals = [
                coincidence_prob(state, a1, AnalyzerSetting(theta=t2))
                + coincidence_prob(state, a1, AnalyzerSetting(theta=t2 + math.pi / 2))
                for t2 in rng.uniform(0, math.pi, 10)
            ]
            assert np.ptp(marginals) < 1e-12
            assert marginals[0] == pytest.approx(single_prob(state, a1, arm=1), abs=1e-12)

    def test_invalid_alignment(self, maximal_state):
        """Test rejection of an alignment factor above 1."""
        with pytest.raises(InvalidInputError):
            coincidence_prob(maximal_state, AnalyzerSetting(), AnalyzerSetting(), alignment=1.5)


class TestVisibility:
    """Tests for fringe visibility"""

    def test_maximal_state_full_visibility(self, maximal_state):
        """Test unit visibility for the maximal state at 45 degrees."""
        assert visibility(maximal_state, AnalyzerSetting(theta=math.radians(45))) == pytest.approx(1.0)

    def test_product_state_along_v_is_flat(self):
        """Test a flat pattern for the product state against V."""
        state = make_state(0.0)
        assert visibility(state, AnalyzerSetting(theta=0.0)) == 0.0

    def test_product_state_at_45_shows_malus_modulation(self):
        """Test full Malus modulation of the product state at 45 degrees."""
        state = make_state(0.0)
        assert visibility(state, AnalyzerSetting(theta=math.radians(45))) == pytest.approx(1.0)

    def test_leaky_polarizers_reduce_visibility(self, maximal_state, leaky_eps):
        """Test that leaky polarizers lower the visibility."""
        fixed = leaky_eps.analyzer(2, math.radians(45))
        assert visibility(maximal_state, fixed, leaky_eps) < 1.0

    def test_partial_alignment_reduces_visibility(self, maximal_state):
        """Test that half alignment halves the visibility."""
        fixed = AnalyzerSetting(theta=math.radians(45))
        assert visibility(maximal_state, fixed, alignment=0.5) == pytest.approx(0.5)

    def test_matches_fringe_scan_extrema(self, produced_state):
        """Test the closed-form visibility against a dense scan."""
        fixed = AnalyzerSetting(theta=math.radians(45))
        scan = fringe_scan(produced_state, fixed, n_points=721)
        p = scan["coincidence_prob"]
        expected = (p.max() - p.min()) / (p.max() + p.min())
        assert visibility(produced_state, fixed) == pytest.approx(expected, abs=1e-4)
        assert list(scan.columns) == ["theta1_deg", "theta2_deg", "coincidence_prob"]
