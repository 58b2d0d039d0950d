"""
Clauser-Horne inequality for the |HH> + f|VV> source.
Evaluates the CH sum and its ratio form for given analyzer settings and finds
the settings that maximize the violation (coarse 4-D grid, then coordinate
refinement, then reduction to a canonical representative).
"""

import math
from typing import Callable, Iterable, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.optimize import minimize

from ..config import GRID_STEP_DEG, OPTIMUM_TOLERANCE, REFINE_RESOLUTION_DEG, setup_logging
from ..utils import ConvergenceError, InvalidInputError, normalize_angle
from .polarization import (
    EntangledState,
    Transmissions,
    coincidence_law,
    coincidence_matrix,
    make_state,
    marginal_probs,
)

logger = setup_logging(__name__)

Objective = Literal["ch", "ratio", "detection"]

MAX_PATTERN_ITERATIONS = 20_000


class CHSettings(BaseModel):
    """Analyzer angles (radians) theta1, theta2, theta1', theta2', kept in [0, pi)."""

    model_config = ConfigDict(frozen=True)

    theta1: float
    theta2: float
    theta1p: float
    theta2p: float

    @field_validator("theta1", "theta2", "theta1p", "theta2p")
    @classmethod
    def _normalize(cls, value: float) -> float:
        return normalize_angle(value)

    @classmethod
    def from_degrees(cls, theta1: float, theta2: float, theta1p: float, theta2p: float) -> "CHSettings":
        return cls(theta1=math.radians(theta1), theta2=math.radians(theta2),
                   theta1p=math.radians(theta1p), theta2p=math.radians(theta2p))

    @classmethod
    def from_array(cls, x: np.ndarray) -> "CHSettings":
        return cls(theta1=float(x[0]), theta2=float(x[1]), theta1p=float(x[2]), theta2p=float(x[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.theta1p, self.theta2p])

    def degrees(self) -> Tuple[float, float, float, float]:
        return tuple(math.degrees(v) for v in self.as_array())


class CHResult(BaseModel):
    """CH sum per pair, ratio R, and the settings they were evaluated at."""

    model_config = ConfigDict(frozen=True)

    ch_per_pair: float
    ratio_r: float
    settings: CHSettings
    numerator: float
    denominator: float

    @property
    def violates(self) -> bool:
        return self.ch_per_pair > 0


def _ratio(numerator: float, denominator: float) -> float:
    if denominator <= 0:
        return math.inf if numerator > 0 else 0.0
    return max(numerator, 0.0) / denominator


def ch_terms(state: EntangledState, x: np.ndarray, eps: Transmissions,
             alignment: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Numerator (four coincidence terms) and denominator (two marginals) of the
    CH combination, vectorized over settings arrays of shape (..., 4).
    """
    x = np.asarray(x, dtype=float)
    e1 = (eps.eps1_par, eps.eps1_perp)
    e2 = (eps.eps2_par, eps.eps2_perp)
    a, b, c, d = x[..., 0], x[..., 1], x[..., 2], x[..., 3]

    def law(t1, t2):
        return coincidence_law(state.f, t1, t2, e1, e2, alignment)

    numerator = law(a, b) - law(a, d) + law(c, b) + law(c, d)
    denominator = (coincidence_law(state.f, c, 0.0, e1, (1.0, 1.0))
                   + coincidence_law(state.f, 0.0, b, (1.0, 1.0), e2))
    return numerator, denominator


def _objective_values(numerator, denominator, objective: Objective,
                      eta: float, background: float):
    if objective == "ch":
        return numerator - denominator
    if objective == "ratio":
        safe = np.where(denominator > 1e-15, denominator, 1.0)
        return np.where(denominator > 1e-15, numerator / safe, -np.inf)
    if objective == "detection":
        return eta**2 * numerator - (eta * denominator + 2.0 * background)
    raise InvalidInputError(f"unknown objective {objective!r}", key="objective")


def ch_sum(state: EntangledState, s: CHSettings, eps: Optional[Transmissions] = None,
           alignment: float = 1.0) -> CHResult:
    """CH combination (coincidence-substituted marginals) and ratio R at settings s."""
    eps = eps or Transmissions.ideal()
    numerator, denominator = (float(v) for v in ch_terms(state, s.as_array(), eps, alignment))
    return CHResult(
        ch_per_pair=numerator - denominator,
        ratio_r=_ratio(numerator, denominator),
        settings=s,
        numerator=numerator,
        denominator=denominator,
    )


def coarse_grid_optimum(state: EntangledState, eps: Optional[Transmissions] = None,
                        objective: Objective = "ch", eta: float = 1.0, background: float = 0.0,
                        alignment: float = 1.0,
                        grid_step_deg: float = GRID_STEP_DEG) -> Tuple[np.ndarray, float]:
    """
    Exhaustive search on a uniform grid over [0, 180) per angle.

    theta1 enters only the two terms P(theta1, theta2) - P(theta1, theta2'),
    so it is maximized per (theta2, theta2') pair first and the remaining
    3-D grid is searched exactly.
    """
    if not 0 < grid_step_deg <= 3.0:
        raise InvalidInputError("grid step must lie in (0, 3] degrees", key="grid_step_deg")
    eps = eps or Transmissions.ideal()
    n = int(math.ceil(180.0 / grid_step_deg))
    grid = np.linspace(0.0, math.pi, n, endpoint=False)

    P = coincidence_matrix(state, grid, grid, eps, alignment)  # P[arm1, arm2]
    M1 = marginal_probs(state, grid, eps, arm=1)
    M2 = marginal_probs(state, grid, eps, arm=2)

    diff = P[:, :, None] - P[:, None, :]  # [a, b, d]
    best_a = np.argmax(diff, axis=0)
    A = np.take_along_axis(diff, best_a[None], axis=0)[0]  # [b, d]

    numerator = A[:, None, :] + P.T[:, :, None] + P[None, :, :]  # [b, c, d]
    denominator = M1[None, :, None] + M2[:, None, None]
    values = _objective_values(numerator, denominator, objective, eta, background)

    b, c, d = np.unravel_index(int(np.argmax(values)), values.shape)
    x = np.array([grid[best_a[b, d]], grid[b], grid[c], grid[d]])
    value = float(values[b, c, d])
    logger.debug(f"Coarse grid {n}^4: best {objective} = {value:.6f}")
    return x, value


def _pattern_search(fun: Callable[[np.ndarray], np.ndarray], x0: np.ndarray, step: float,
                    resolution: float, free: Iterable[int]) -> Tuple[np.ndarray, float]:
    """Derivative-free coordinate search with step halving down to the resolution."""
    free = list(free)
    x = np.array(x0, dtype=float)
    best = float(fun(x[None])[0])
    iterations = 0
    while step >= resolution / 2:
        moves = []
        for k in free:
            for sign in (1.0, -1.0):
                y = x.copy()
                y[k] += sign * step
                moves.append(y)
        moves = np.array(moves)
        values = fun(moves)
        i = int(np.argmax(values))
        if values[i] > best + 1e-15:
            x, best = moves[i], float(values[i])
        else:
            step /= 2
        iterations += 1
        if iterations > MAX_PATTERN_ITERATIONS:
            raise ConvergenceError("coordinate refinement did not settle")

    # Powell polish along diagonal ridges
    def negative(v):
        y = x.copy()
        y[free] = v
        return -float(fun(y[None])[0])

    polished = minimize(negative, x[free], method="Powell",
                        options={"xtol": resolution / 10, "ftol": 1e-14})
    if polished.success and -polished.fun > best:
        x = x.copy()
        x[free] = polished.x
        best = -float(polished.fun)
    return x, best


def _symmetry_images(x: np.ndarray, arm_symmetric: bool) -> List[np.ndarray]:
    """Images of the settings under reflection and (for symmetric arms) arm relabelling."""
    images = [x, -x]
    if arm_symmetric:
        swapped = x[[3, 2, 1, 0]]
        images += [swapped, -swapped]
    return [normalize_angle(img) for img in images]


def _canonical_key(x: np.ndarray) -> Tuple[float, ...]:
    a, b, c, d = (round(math.degrees(v), 6) % 180.0 for v in x)
    return d, b, a, c


def canonical_settings(fun: Callable[[np.ndarray], np.ndarray], x: np.ndarray, value: float,
                       arm_symmetric: bool, resolution: float,
                       tolerance: float = OPTIMUM_TOLERANCE) -> np.ndarray:
    """
    Representative of an optimum modulo symmetry: among equally good settings
    (exact symmetry images, or points of a flat optimum reached with theta2'
    pinned at 0) report the one with smallest theta2', then theta2, theta1,
    theta1'.
    """
    candidates = []
    for image in _symmetry_images(x, arm_symmetric):
        if float(fun(image[None])[0]) >= value - tolerance:
            candidates.append(image)
        pinned_start = normalize_angle(image - image[3])
        pinned, pinned_value = _pattern_search(fun, pinned_start, math.radians(GRID_STEP_DEG),
                                               resolution, free=(0, 1, 2))
        if pinned_value >= value - tolerance:
            candidates.append(normalize_angle(pinned))

    if not candidates:
        return normalize_angle(x)
    return min(candidates, key=_canonical_key)


def maximize_settings(state: EntangledState, eps: Optional[Transmissions] = None,
                      objective: Objective = "ch", eta: float = 1.0, background: float = 0.0,
                      alignment: float = 1.0, grid_step_deg: float = GRID_STEP_DEG,
                      resolution_deg: float = REFINE_RESOLUTION_DEG,
                      canonical: bool = True) -> Tuple[CHSettings, float, float]:
    """
    Maximize a CH-type objective over the four analyzer angles.

    Returns:
        (settings, refined_value, coarse_value)
    """
    eps = eps or Transmissions.ideal()

    def fun(xs: np.ndarray) -> np.ndarray:
        numerator, denominator = ch_terms(state, xs, eps, alignment)
        return _objective_values(numerator, denominator, objective, eta, background)

    x0, coarse_value = coarse_grid_optimum(state, eps, objective, eta, background,
                                           alignment, grid_step_deg)
    resolution = math.radians(resolution_deg)
    x, value = _pattern_search(fun, x0, math.radians(grid_step_deg), resolution, free=range(4))
    if canonical:
        x = canonical_settings(fun, x, value, eps.is_arm_symmetric, resolution)
        value = float(fun(x[None])[0])
    return CHSettings.from_array(x), value, coarse_value


def optimize_settings(state: EntangledState, eps: Optional[Transmissions] = None,
                      objective: Literal["ch", "ratio"] = "ch",
                      alignment: float = 1.0) -> CHResult:
    """
    Settings that maximize the violation for this state.

    The CH sum is maximized by default and R reported at its optimum;
    objective="ratio" maximizes R itself. A maximum with R <= 1 is a valid
    (non-violating) result.
    """
    if state.f_mag == 0:
        logger.warning("Product state: no violation is possible")
    settings, value, coarse_value = maximize_settings(state, eps, objective, alignment=alignment)
    result = ch_sum(state, settings, eps, alignment)
    degs = ", ".join(f"{v:.2f}" for v in settings.degrees())
    logger.info(f"Optimum for |f|={state.f_mag:.3f}: R = {result.ratio_r:.4f}, "
                f"CH/N = {result.ch_per_pair:.5f} at ({degs}) deg")
    if not result.violates:
        logger.warning("Maximum does not violate the CH inequality")
    return result


def ch_phase_scan(f_mag: float, settings: CHSettings, phases: Iterable[float],
                  eps: Optional[Transmissions] = None) -> pd.DataFrame:
    """CH and R against the phase of f at fixed settings."""
    rows = []
    for phase in phases:
        result = ch_sum(make_state(f_mag, phase), settings, eps)
        rows.append({"f_phase_rad": float(phase), "ch_per_pair": result.ch_per_pair,
                     "ratio_r": result.ratio_r})
    return pd.DataFrame(rows, columns=["f_phase_rad", "ch_per_pair", "ratio_r"])
