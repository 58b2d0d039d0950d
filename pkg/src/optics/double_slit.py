"""
Fourth-order (coincidence) interference of two PDC photons, each crossing its
own slit of a double slit. Computes the coincidence pattern with diffraction
envelopes, detector-aperture averaging, scans and synthetic count data.
"""

import math
from typing import Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid
from scipy.signal import find_peaks

from ..config import (
    APERTURE_SAMPLES,
    DET1_DISTANCE_M,
    DET2_DISTANCE_M,
    IRIS_APERTURE_M,
    SLIT_SEPARATION_M,
    SLIT_WAVELENGTH_M,
    SLIT_WIDTH_M,
    setup_logging,
)
from ..utils import InvalidInputError

logger = setup_logging(__name__)


class SlitGeometry(BaseModel):
    """Slits, illumination and detector placement (SI units, radians)."""

    model_config = ConfigDict(frozen=True)

    separation_s: float = Field(default=SLIT_SEPARATION_M, gt=0.0)
    width_w: float = Field(default=SLIT_WIDTH_M, gt=0.0)
    wavelength: float = Field(default=SLIT_WAVELENGTH_M, gt=0.0)
    incidence_A: float = 0.0
    incidence_B: float = 0.0
    det1_distance: float = Field(default=DET1_DISTANCE_M, gt=0.0)
    det2_distance: float = Field(default=DET2_DISTANCE_M, gt=0.0)
    aperture1: float = Field(default=IRIS_APERTURE_M, ge=0.0)
    aperture2: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _check_slits(self) -> "SlitGeometry":
        if self.separation_s <= self.width_w:
            raise ValueError("slit separation must exceed slit width")
        for name in ("incidence_A", "incidence_B"):
            if abs(getattr(self, name)) >= math.pi / 2:
                raise ValueError(f"{name} must lie in (-pi/2, pi/2)")
        return self

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def swapped(self) -> "SlitGeometry":
        """Exchange the roles of the two detectors (and the two incidence angles)."""
        return self.model_copy(update={
            "incidence_A": self.incidence_B, "incidence_B": self.incidence_A,
            "det1_distance": self.det2_distance, "det2_distance": self.det1_distance,
            "aperture1": self.aperture2, "aperture2": self.aperture1,
        })


def diffraction_g(theta, theta_i, geom: SlitGeometry):
    """Single-slit amplitude sin(x)/x with x = (k w / 2)(sin theta - sin theta_i)."""
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) >= math.pi / 2):
        raise InvalidInputError("diffraction angle must satisfy |theta| < pi/2", key="theta")
    x = 0.5 * geom.k * geom.width_w * (np.sin(theta) - math.sin(theta_i))
    # np.sinc(u) = sin(pi u)/(pi u) and equals 1 at u = 0
    g = np.sinc(x / math.pi)
    return float(g) if g.ndim == 0 else g


def _point_pattern(geom: SlitGeometry, x1, x2):
    theta1 = np.arctan(np.asarray(x1, dtype=float) / geom.det1_distance)
    theta2 = np.arctan(np.asarray(x2, dtype=float) / geom.det2_distance)
    g1a = diffraction_g(theta1, geom.incidence_A, geom)
    g1b = diffraction_g(theta1, geom.incidence_B, geom)
    g2a = diffraction_g(theta2, geom.incidence_A, geom)
    g2b = diffraction_g(theta2, geom.incidence_B, geom)
    phase = geom.k * geom.separation_s * (np.sin(theta1) - np.sin(theta2))
    return (g1a**2 * g2b**2 + g2a**2 * g1b**2
            + 2.0 * g1a * g2b * g2a * g1b * np.cos(phase))


def _window(aperture: float) -> np.ndarray:
    if aperture <= 0:
        return np.zeros(1)
    # midpoint samples of a top-hat of full width `aperture`
    return ((np.arange(APERTURE_SAMPLES) + 0.5) / APERTURE_SAMPLES - 0.5) * aperture


def coincidence_pattern(geom: SlitGeometry, x1, x2):
    """
    Coincidence intensity (arbitrary units) for detectors at transverse
    offsets x1, x2 (metres); averaged over each detector's aperture.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    w1 = _window(geom.aperture1)
    w2 = _window(geom.aperture2)
    samples = _point_pattern(
        geom,
        x1[..., None, None] + w1[:, None],
        x2[..., None, None] + w2[None, :],
    )
    pattern = samples.mean(axis=(-2, -1))
    return float(pattern) if pattern.ndim == 0 else pattern


def pattern_scan(geom: SlitGeometry, fixed_x2: float, x1_range: Iterable[float],
                 normalize: bool = True) -> pd.DataFrame:
    """Coincidences while detector 1 sweeps x1_range and detector 2 stays at fixed_x2."""
    x1 = np.asarray(list(x1_range), dtype=float)
    if x1.size == 0:
        raise InvalidInputError("scan range is empty", key="x1_range")
    raw = coincidence_pattern(geom, x1, np.full_like(x1, fixed_x2))
    raw = np.atleast_1d(raw)
    peak = raw.max()
    scan = pd.DataFrame({"x1_m": x1, "x2_m": np.full_like(x1, fixed_x2), "coincidence": raw})
    if normalize:
        scan["coincidence_norm"] = raw / peak if peak > 0 else np.zeros_like(raw)
    logger.info(f"Scanned {len(scan)} points at x2 = {fixed_x2 * 100:.2f} cm")
    return scan


def single_marginal(geom: SlitGeometry, x1: float, x2_values: np.ndarray) -> Tuple[float, float]:
    """
    Detector-1 signal: the pattern integrated over detector-2 positions, and
    the same integral without the interference term.

    Returns:
        (with_interference, envelopes_only)
    """
    x2_values = np.asarray(x2_values, dtype=float)
    point = geom.model_copy(update={"aperture1": 0.0, "aperture2": 0.0})
    full = _point_pattern(point, np.full_like(x2_values, x1), x2_values)
    theta1 = math.atan(x1 / geom.det1_distance)
    theta2 = np.arctan(x2_values / geom.det2_distance)
    envelopes = (diffraction_g(theta1, geom.incidence_A, geom) ** 2
                 * diffraction_g(theta2, geom.incidence_B, geom) ** 2
                 + diffraction_g(theta2, geom.incidence_A, geom) ** 2
                 * diffraction_g(theta1, geom.incidence_B, geom) ** 2)
    return float(trapezoid(full, x2_values)), float(trapezoid(envelopes, x2_values))


def fringe_period(geom: SlitGeometry, detector: int = 1) -> float:
    """Small-angle fringe period lambda L / s (metres) at the given detector."""
    distance = geom.det1_distance if detector == 1 else geom.det2_distance
    return geom.wavelength * distance / geom.separation_s


def count_fringe_period(scan: pd.DataFrame, column: str = "coincidence") -> Optional[float]:
    """Mean spacing of the maxima in a scan, or None if fewer than two are found."""
    peaks, _ = find_peaks(scan[column].to_numpy())
    if len(peaks) < 2:
        logger.warning("Fewer than two maxima in scan; period undefined")
        return None
    positions = scan["x1_m"].to_numpy()[peaks]
    return float(np.mean(np.diff(positions)))


def synthetic_counts(geom: SlitGeometry, fixed_x2: float, x1_values: Iterable[float],
                     peak_counts: float, background: float, seed: int) -> pd.DataFrame:
    """Seeded Poisson counts from the normalized pattern plus a flat background."""
    if peak_counts < 0 or background < 0:
        raise InvalidInputError("peak_counts and background must be >= 0")
    scan = pattern_scan(geom, fixed_x2, x1_values)
    expected = peak_counts * scan["coincidence_norm"].to_numpy() + background
    rng = np.random.default_rng(seed)
    counts = rng.poisson(expected)
    return pd.DataFrame({
        "x_m": scan["x1_m"].to_numpy(),
        "count": counts,
        "sigma": np.sqrt(np.maximum(counts, 1)),
        "expected": expected,
    })
