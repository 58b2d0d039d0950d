"""
Two-photon polarization state |HH> + f|VV> and its detection probabilities
through real (leaky) polarizers.

Angles are radians measured from the V axis: a polarizer at theta transmits
the H component with amplitude sin(theta) and the V component with cos(theta).
"""

import math
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import setup_logging
from ..utils import InvalidInputError, normalize_angle

logger = setup_logging(__name__)

TWO_PI = 2.0 * math.pi

# Bell states reachable from the source: (f_mag, f_phase, arm-2 angle offset)
BELL_STATES = {
    "phi_plus": (1.0, 0.0, 0.0),
    "phi_minus": (1.0, math.pi, 0.0),
    "psi_plus": (1.0, 0.0, math.pi / 2),
    "psi_minus": (1.0, math.pi, math.pi / 2),
}


class EntangledState(BaseModel):
    """Normalized |HH> + f|VV> with complex f = f_mag * exp(i f_phase)."""

    model_config = ConfigDict(frozen=True)

    f_mag: float = Field(ge=0.0)
    f_phase: float = 0.0

    @field_validator("f_phase")
    @classmethod
    def _wrap_phase(cls, value: float) -> float:
        wrapped = math.fmod(value, TWO_PI)
        if wrapped < 0:
            wrapped += TWO_PI
        return 0.0 if math.isclose(wrapped, TWO_PI) else wrapped

    @property
    def f(self) -> complex:
        return self.f_mag * complex(math.cos(self.f_phase), math.sin(self.f_phase))

    @property
    def norm(self) -> float:
        """The 1/(1+|f|^2) normalization factor."""
        return 1.0 / (1.0 + self.f_mag**2)

    @property
    def weights(self) -> Tuple[float, float]:
        """Probability weights of the HH and VV components."""
        return self.norm, self.f_mag**2 * self.norm

    def amplitudes(self) -> np.ndarray:
        """State vector in the (HH, HV, VH, VV) basis."""
        return math.sqrt(self.norm) * np.array([1.0, 0.0, 0.0, self.f], dtype=complex)


class AnalyzerSetting(BaseModel):
    """One polarizer: angle from V plus pass (eps_par) and leak (eps_perp) transmissions."""

    model_config = ConfigDict(frozen=True)

    theta: float = 0.0
    eps_par: float = Field(default=1.0, ge=0.0, le=1.0)
    eps_perp: float = Field(default=0.0, ge=0.0, le=1.0)
    is_open: bool = False

    @model_validator(mode="after")
    def _check_ordering(self) -> "AnalyzerSetting":
        if self.eps_perp > self.eps_par:
            raise ValueError("eps_perp must not exceed eps_par")
        return self

    @classmethod
    def open(cls) -> "AnalyzerSetting":
        """The no-polarizer setting (the infinity symbol of the CH sum)."""
        return cls(theta=0.0, eps_par=1.0, eps_perp=1.0, is_open=True)

    @property
    def effective(self) -> Tuple[float, float]:
        """(eps_par, eps_perp) actually applied; an open analyzer passes everything."""
        if self.is_open:
            return 1.0, 1.0
        return self.eps_par, self.eps_perp


class Transmissions(BaseModel):
    """Polarizer transmissions of both arms."""

    model_config = ConfigDict(frozen=True)

    eps1_par: float = Field(default=1.0, ge=0.0, le=1.0)
    eps1_perp: float = Field(default=0.0, ge=0.0, le=1.0)
    eps2_par: float = Field(default=1.0, ge=0.0, le=1.0)
    eps2_perp: float = Field(default=0.0, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_ordering(self) -> "Transmissions":
        if self.eps1_perp > self.eps1_par or self.eps2_perp > self.eps2_par:
            raise ValueError("eps_perp must not exceed eps_par on either arm")
        return self

    @classmethod
    def ideal(cls) -> "Transmissions":
        return cls()

    @classmethod
    def symmetric(cls, eps_par: float, eps_perp: float) -> "Transmissions":
        return cls(eps1_par=eps_par, eps1_perp=eps_perp, eps2_par=eps_par, eps2_perp=eps_perp)

    @property
    def is_arm_symmetric(self) -> bool:
        return self.eps1_par == self.eps2_par and self.eps1_perp == self.eps2_perp

    def analyzer(self, arm: int, theta: float) -> AnalyzerSetting:
        """Analyzer on arm 1 or 2 at angle theta."""
        if arm == 1:
            return AnalyzerSetting(theta=theta, eps_par=self.eps1_par, eps_perp=self.eps1_perp)
        if arm == 2:
            return AnalyzerSetting(theta=theta, eps_par=self.eps2_par, eps_perp=self.eps2_perp)
        raise InvalidInputError(f"arm must be 1 or 2, got {arm}", key="arm")


def make_state(f_mag: float, f_phase: float = 0.0) -> EntangledState:
    """Build the normalized state descriptor; negative f_mag is rejected."""
    if f_mag < 0 or math.isnan(f_mag):
        raise InvalidInputError(f"f_mag must be >= 0, got {f_mag}", key="f_mag")
    return EntangledState(f_mag=f_mag, f_phase=f_phase)


def bell_state(kind: str) -> Tuple[EntangledState, float]:
    """
    One of the four Bell states.

    Phi states come from the phase of f; Psi states additionally rotate the
    arm-2 polarization by 90 degrees, returned as an angle offset to add to
    every arm-2 analyzer.
    """
    if kind not in BELL_STATES:
        raise InvalidInputError(f"unknown Bell state {kind!r}", key="kind")
    f_mag, f_phase, offset = BELL_STATES[kind]
    return make_state(f_mag, f_phase), offset


def coincidence_law(f: complex, theta1, theta2,
                    eps1: Tuple[float, float], eps2: Tuple[float, float],
                    alignment: float = 1.0):
    """
    Per-pair coincidence probability, vectorized over theta1/theta2.

    Sum of the four pass/leak channel terms plus the interference term; the
    interference term is proportional to (f + f*) and scaled by alignment.
    """
    e1_par, e1_perp = eps1
    e2_par, e2_perp = eps2
    s1, c1 = np.sin(theta1), np.cos(theta1)
    s2, c2 = np.sin(theta2), np.cos(theta2)
    s1s, c1s, s2s, c2s = s1 * s1, c1 * c1, s2 * s2, c2 * c2
    mag2 = abs(f) ** 2

    direct = (e1_par * e2_par * s1s * s2s + e1_perp * e2_perp * c1s * c2s
              + e1_par * e2_perp * s1s * c2s + e1_perp * e2_par * c1s * s2s)
    flipped = mag2 * (e1_perp * e2_perp * s1s * s2s + e1_par * e2_par * c1s * c2s
                      + e1_par * e2_perp * c1s * s2s + e1_perp * e2_par * s1s * c2s)
    contrast = e1_par * e2_par + e1_perp * e2_perp - e1_par * e2_perp - e1_perp * e2_par
    cross = 2.0 * f.real * alignment * contrast * s1 * c1 * s2 * c2

    return (direct + flipped + cross) / (1.0 + mag2)


def coincidence_prob(state: EntangledState, a1: AnalyzerSetting, a2: AnalyzerSetting,
                     alignment: float = 1.0) -> float:
    """Probability that both photons of a pair pass their analyzers."""
    if not 0.0 <= alignment <= 1.0:
        raise InvalidInputError(f"alignment must lie in [0, 1], got {alignment}", key="alignment")
    return float(coincidence_law(state.f, a1.theta, a2.theta, a1.effective, a2.effective, alignment))


def single_prob(state: EntangledState, analyzer: AnalyzerSetting, arm: int = 1) -> float:
    """True single-detection probability of one arm (other photon unrestricted)."""
    if arm == 1:
        return coincidence_prob(state, analyzer, AnalyzerSetting.open())
    return coincidence_prob(state, AnalyzerSetting.open(), analyzer)


def coincidence_matrix(state: EntangledState, angles1: np.ndarray, angles2: np.ndarray,
                       eps: Optional[Transmissions] = None, alignment: float = 1.0) -> np.ndarray:
    """Coincidence probabilities on the outer grid angles1 x angles2."""
    eps = eps or Transmissions.ideal()
    t1 = np.asarray(angles1, dtype=float)[:, None]
    t2 = np.asarray(angles2, dtype=float)[None, :]
    return coincidence_law(state.f, t1, t2, (eps.eps1_par, eps.eps1_perp),
                           (eps.eps2_par, eps.eps2_perp), alignment)


def marginal_probs(state: EntangledState, angles: np.ndarray,
                   eps: Optional[Transmissions] = None, arm: int = 1) -> np.ndarray:
    """Open-analyzer marginals N(theta, inf)/N (arm 1) or N(inf, theta)/N (arm 2)."""
    eps = eps or Transmissions.ideal()
    angles = np.asarray(angles, dtype=float)
    if arm == 1:
        return coincidence_law(state.f, angles, 0.0, (eps.eps1_par, eps.eps1_perp), (1.0, 1.0))
    return coincidence_law(state.f, 0.0, angles, (1.0, 1.0), (eps.eps2_par, eps.eps2_perp))


def visibility(state: EntangledState, a_fixed: AnalyzerSetting,
               eps: Optional[Transmissions] = None, alignment: float = 1.0) -> float:
    """
    Fringe visibility (max-min)/(max+min) when the arm-1 polarizer is rotated
    against the fixed arm-2 analyzer.

    The coincidence curve is exactly a + b cos(2 theta) + c sin(2 theta), so
    three samples determine its extrema. A flat zero pattern returns 0.
    """
    if not 0.0 <= alignment <= 1.0:
        raise InvalidInputError(f"alignment must lie in [0, 1], got {alignment}", key="alignment")
    eps = eps or Transmissions.ideal()
    scanned = (eps.eps1_par, eps.eps1_perp)
    p0, p45, p90 = (float(coincidence_law(state.f, theta, a_fixed.theta, scanned,
                                          a_fixed.effective, alignment))
                    for theta in (0.0, math.pi / 4, math.pi / 2))

    mean = 0.5 * (p0 + p90)
    amplitude = math.hypot(0.5 * (p0 - p90), p45 - mean)
    if mean <= 1e-15:
        logger.warning("Flat coincidence pattern; visibility set to 0")
        return 0.0
    return min(amplitude / mean, 1.0)


def fringe_scan(state: EntangledState, a_fixed: AnalyzerSetting,
                eps: Optional[Transmissions] = None, alignment: float = 1.0,
                n_points: int = 181) -> pd.DataFrame:
    """Coincidence probability as the arm-1 polarizer sweeps [0, 180] degrees."""
    if n_points < 3:
        raise InvalidInputError("fringe scan needs at least 3 points", key="n_points")
    eps = eps or Transmissions.ideal()
    theta = np.linspace(0.0, math.pi, n_points)
    prob = coincidence_law(state.f, theta, a_fixed.theta, (eps.eps1_par, eps.eps1_perp),
                           a_fixed.effective, alignment)
    return pd.DataFrame({
        "theta1_deg": np.degrees(theta),
        "theta2_deg": np.full(n_points, math.degrees(normalize_angle(a_fixed.theta))),
        "coincidence_prob": prob,
    })
