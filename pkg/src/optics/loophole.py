"""
Detection-loophole boundaries in the (f, eta) plane and tests of two local
realistic models: the detection-rate floor of the stochastic-optics model and
the visibility inequality of its simplified successor.
"""

import math
from typing import Iterable, List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import bisect

from ..config import (
    CRITICAL_EFFICIENCY_XTOL,
    MEAN_WAVELENGTH_M,
    N_JOBS,
    SANTOS_ABSORB_S,
    SANTOS_ACTIVE_RADIUS_M,
    SANTOS_COHERENCE_S,
    SANTOS_DEPTH_M,
    SANTOS_DISTANCE_M,
    SANTOS_ETA,
    SANTOS_FOCAL_M,
    setup_logging,
)
from ..utils import ConvergenceError, InvalidInputError, validate_probability
from .bell import maximize_settings
from .polarization import Transmissions, make_state

logger = setup_logging(__name__)

# Lower end of the efficiency bracket; below 2/3 no setting violates
ETA_BRACKET_LOW = 0.5


class SantosParams(BaseModel):
    """Inputs of the detection-rate floor, SI units throughout."""

    model_config = ConfigDict(frozen=True)

    eta: float = Field(default=SANTOS_ETA, gt=0.0, le=1.0)
    focal_F: float = Field(default=SANTOS_FOCAL_M, gt=0.0)
    active_radius_Rc: float = Field(default=SANTOS_ACTIVE_RADIUS_M, gt=0.0)
    distance_d: float = Field(default=SANTOS_DISTANCE_M, gt=0.0)
    coherence_tau: float = Field(default=SANTOS_COHERENCE_S, gt=0.0)
    wavelength: float = Field(default=MEAN_WAVELENGTH_M, gt=0.0)
    depth_L: float = Field(default=SANTOS_DEPTH_M, gt=0.0)
    absorb_T: float = Field(default=SANTOS_ABSORB_S, gt=0.0)
    singles_rate_RS: Optional[float] = Field(default=None, gt=0.0)


class LoopholeMap(BaseModel):
    """Settings-maximized CH per pair on an f x eta grid (rows follow f_grid)."""

    f_grid: List[float]
    eta_grid: List[float]
    ch_per_pair: List[List[float]]

    @model_validator(mode="after")
    def _check_shape(self) -> "LoopholeMap":
        if len(self.ch_per_pair) != len(self.f_grid):
            raise ValueError("ch_per_pair rows must match f_grid")
        if any(len(row) != len(self.eta_grid) for row in self.ch_per_pair):
            raise ValueError("ch_per_pair columns must match eta_grid")
        return self

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.ch_per_pair, dtype=float)

    def to_frame(self) -> pd.DataFrame:
        """Tidy table: one row per (f, eta) cell."""
        f_mesh, eta_mesh = np.meshgrid(self.f_grid, self.eta_grid, indexing="ij")
        return pd.DataFrame({
            "f": f_mesh.ravel(),
            "eta": eta_mesh.ravel(),
            "ch_per_pair": self.matrix.ravel(),
        })

    def to_matrix_frame(self) -> pd.DataFrame:
        """Wide table: one row per f, one column per eta value."""
        frame = pd.DataFrame(self.matrix, columns=[f"eta={eta:.10g}" for eta in self.eta_grid])
        frame.insert(0, "f", self.f_grid)
        return frame


class VisibilityTest(BaseModel):
    """Outcome of the visibility inequality; satisfied means the local model survives."""

    model_config = ConfigDict(frozen=True)

    v_a: float
    v_b: float
    lhs: float
    rhs: float
    satisfied: bool


def ch_per_detection(f: float, eta: float, eps: Optional[Transmissions] = None,
                     background: float = 0.0, f_phase: float = 0.0) -> float:
    """
    Settings-maximized CH per pair with true singles: coincidences scale as
    eta^2, single counts as eta, plus a per-detector background probability.
    """
    validate_probability(eta, "eta")
    if background < 0:
        raise InvalidInputError("background must be >= 0", key="background")
    state = make_state(f, f_phase)
    _, value, _ = maximize_settings(state, eps, objective="detection", eta=eta,
                                    background=background, canonical=False)
    return value


def critical_efficiency(f: float, eps: Optional[Transmissions] = None,
                        background: float = 0.0) -> Optional[float]:
    """
    Smallest total efficiency giving a loophole-free violation, by bisection
    of ch_per_detection(f, eta) = 0.

    Returns:
        The threshold, or None when no efficiency up to 1 violates (f = 0).
    """
    if f < 0:
        raise InvalidInputError(f"f must be >= 0, got {f}", key="f")
    if f == 0:
        logger.warning("Product state: no violation at any efficiency")
        return None

    def fun(eta: float) -> float:
        return ch_per_detection(f, eta, eps, background)

    high = fun(1.0)
    if high <= 0:
        logger.warning(f"f={f:.4f}: no violation even at unit efficiency")
        return None
    low = fun(ETA_BRACKET_LOW)
    if low >= 0:
        raise ConvergenceError(f"f={f:.4f}: violation already at eta={ETA_BRACKET_LOW}, no bracket")

    root = bisect(fun, ETA_BRACKET_LOW, 1.0, xtol=CRITICAL_EFFICIENCY_XTOL)
    logger.info(f"Critical efficiency for f={f:.4f}: {root:.4f}")
    return float(root)


def critical_efficiency_from_ratio(f: float, eps: Optional[Transmissions] = None) -> Optional[float]:
    """Closed-form cross-check without background: threshold = 1 / max R."""
    if f <= 0:
        return None
    _, r_max, _ = maximize_settings(make_state(f), eps, objective="ratio", canonical=False)
    if r_max <= 1:
        return None
    return 1.0 / r_max


def critical_efficiency_curve(f_values: Iterable[float], eps: Optional[Transmissions] = None,
                              background: float = 0.0) -> pd.DataFrame:
    """Threshold efficiency for each f (NaN where no violation is possible)."""
    rows = []
    for f in f_values:
        eta_c = critical_efficiency(f, eps, background)
        rows.append({"f": float(f), "critical_eta": math.nan if eta_c is None else eta_c})
    return pd.DataFrame(rows, columns=["f", "critical_eta"])


def loophole_map(f_grid: Iterable[float], eta_grid: Iterable[float],
                 eps: Optional[Transmissions] = None, background: float = 0.0,
                 n_jobs: int = N_JOBS) -> LoopholeMap:
    """CH per pair over an f x eta grid; cells are independent and merged in grid order."""
    f_grid = [float(v) for v in f_grid]
    eta_grid = [float(v) for v in eta_grid]
    if not f_grid or not eta_grid:
        raise InvalidInputError("loophole map needs non-empty grids")
    logger.info(f"Computing loophole map on {len(f_grid)} x {len(eta_grid)} cells")

    cells = Parallel(n_jobs=n_jobs)(
        delayed(ch_per_detection)(f, eta, eps, background)
        for f in f_grid for eta in eta_grid
    )
    matrix = np.asarray(cells, dtype=float).reshape(len(f_grid), len(eta_grid))
    return LoopholeMap(f_grid=f_grid, eta_grid=eta_grid, ch_per_pair=matrix.tolist())


def santos_min_rate(p: SantosParams) -> float:
    """Single-detection rate (Hz) below which the model departs from quantum predictions."""
    numerator = p.eta * p.focal_F**2 * p.active_radius_Rc**2
    denominator = 2.0 * p.depth_L * p.distance_d**2 * p.wavelength * math.sqrt(p.coherence_tau * p.absorb_T)
    if denominator <= 0:
        raise InvalidInputError("degenerate detection-floor denominator")
    return numerator / denominator


def santos_T_bound(p: SantosParams) -> float:
    """Absorption time (s) at which the measured singles rate sits exactly on the floor."""
    if p.singles_rate_RS is None:
        raise InvalidInputError("singles_rate_RS is required", key="singles_rate_RS")
    root_t = p.eta * p.focal_F**2 * p.active_radius_Rc**2 / (
        2.0 * p.depth_L * p.distance_d**2 * p.wavelength * p.singles_rate_RS)
    return root_t**2 / p.coherence_tau


def santos_check(p: SantosParams) -> dict:
    """Floor rate, T bound and whether the measured rate lies below the floor."""
    min_rate = santos_min_rate(p)
    record = {"min_rate_hz": min_rate, "absorb_T_s": p.absorb_T}
    if p.singles_rate_RS is not None:
        record["singles_rate_hz"] = p.singles_rate_RS
        record["T_bound_s"] = santos_T_bound(p)
        record["below_floor"] = p.singles_rate_RS < min_rate
    return record


def visibility_inequality(n0: float, n90: float, n22p5: float, n67p5: float,
                          eta: float) -> VisibilityTest:
    """
    Compare V_b / V_a with 1 + cos^2(pi eta/2) [V_b - sin^2(pi eta/2)/(pi eta/2)^2].

    Counts are coincidences at relative analyzer angles 0, pi/2, pi/8, 3pi/8.
    """
    counts = {"n0": n0, "n90": n90, "n22p5": n22p5, "n67p5": n67p5}
    for key, value in counts.items():
        if value < 0:
            raise InvalidInputError(f"{key} must be >= 0", key=key)
    validate_probability(eta, "eta")
    if n0 + n90 == 0:
        raise InvalidInputError("N(0) + N(pi/2) is zero", key="n0")
    if n22p5 + n67p5 == 0:
        raise InvalidInputError("N(pi/8) + N(3pi/8) is zero", key="n22p5")

    v_a = (n0 - n90) / (n0 + n90)
    v_b = math.sqrt(2.0) * (n22p5 - n67p5) / (n22p5 + n67p5)
    if v_a == 0:
        raise InvalidInputError("V_a is zero", key="n0")

    half = math.pi * eta / 2.0
    # sinc handles the eta -> 0 limit
    diffraction = float(np.sinc(half / math.pi)) ** 2
    lhs = v_b / v_a
    rhs = 1.0 + math.cos(half) ** 2 * (v_b - diffraction)
    return VisibilityTest(v_a=v_a, v_b=v_b, lhs=lhs, rhs=rhs, satisfied=lhs > rhs)
