"""
Poisson counting statistics shared by the coincidence analyses.
Accidental coincidences, significance, weighted chi-square fits of
fixed-shape patterns to count data, and a sign-runs residual check.
"""

import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import chi2, norm

from ..config import CHI2_REJECT_LEVEL, setup_logging
from ..optics.double_slit import SlitGeometry, coincidence_pattern
from ..utils import InvalidInputError

logger = setup_logging(__name__)

Basis = Sequence[Callable[[np.ndarray], np.ndarray]]


class RateConfig(BaseModel):
    """Two detector singles rates (Hz), coincidence window and acquisition time (s)."""

    model_config = ConfigDict(frozen=True)

    rate1: float = Field(gt=0.0)
    rate2: float = Field(gt=0.0)
    window: float = Field(ge=0.0)
    duration: float = Field(default=1.0, gt=0.0)


class FitReport(BaseModel):
    """Result of a weighted linear least-squares fit."""

    params: List[float]
    param_sigmas: List[float]
    chi2: float = Field(ge=0.0)
    dof: int = Field(ge=1)
    chi2_reduced: float
    p_value: float
    rejected_at_5pct: bool
    residuals: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_reduced(self) -> "FitReport":
        if not math.isclose(self.chi2_reduced, self.chi2 / self.dof, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("chi2_reduced must equal chi2 / dof")
        return self


def accidental_rate(rc: RateConfig) -> float:
    """Rate (Hz) of chance coincidences between two uncorrelated streams."""
    return rc.rate1 * rc.rate2 * rc.window


def simulate_accidental_rate(rc: RateConfig, seed: int) -> float:
    """
    Monte Carlo estimate of accidental_rate: two Poisson arrival streams,
    counting stream-2 events within +/- window/2 of each stream-1 event.
    """
    rng = np.random.default_rng(seed)
    times1 = np.sort(rng.uniform(0.0, rc.duration, rng.poisson(rc.rate1 * rc.duration)))
    times2 = np.sort(rng.uniform(0.0, rc.duration, rng.poisson(rc.rate2 * rc.duration)))
    half = 0.5 * rc.window
    upper = np.searchsorted(times2, times1 + half, side="left")
    lower = np.searchsorted(times2, times1 - half, side="right")
    pairs = int(np.sum(upper - lower))
    logger.debug(f"{len(times1)} x {len(times2)} arrivals, {pairs} chance pairs")
    return pairs / rc.duration


def significance(value: float, sigma: float) -> float:
    """Number of standard deviations of value away from zero."""
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be > 0, got {sigma}", key="sigma")
    return value / sigma


def poisson_sigma(counts):
    """sqrt(count), floored at one count for empty bins."""
    sigma = np.sqrt(np.maximum(np.asarray(counts, dtype=float), 1.0))
    return float(sigma) if sigma.ndim == 0 else sigma


def pattern_basis(geom: SlitGeometry, fixed_x2: float, offset: bool = True) -> Basis:
    """
    Double-slit coincidence shape (geometry fixed, normalized to its maximum
    over the fitted points) as a fit basis, with an optional flat offset.
    """
    def shape(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        curve = np.atleast_1d(coincidence_pattern(geom, x, np.full_like(x, fixed_x2)))
        peak = curve.max()
        return curve / peak if peak > 0 else curve

    basis: List[Callable[[np.ndarray], np.ndarray]] = [shape]
    if offset:
        basis.append(lambda x: np.ones_like(np.asarray(x, dtype=float)))
    return basis


def polynomial_basis(degree: int) -> Basis:
    """1, x, ..., x^degree; degree 0 is the constant model, 1 the linear one."""
    if degree < 0:
        raise InvalidInputError("degree must be >= 0", key="degree")
    return [lambda x, k=k: np.asarray(x, dtype=float) ** k for k in range(degree + 1)]


def chi2_fit(data: pd.DataFrame, model: Basis, level: float = CHI2_REJECT_LEVEL) -> FitReport:
    """
    Weighted least squares of count data on a linear combination of basis
    curves (free amplitudes, fixed shapes).

    Args:
        data: columns x, count, sigma
        model: basis functions; n_params = len(model)
        level: upper-tail probability below which the model is rejected

    Returns:
        FitReport
    """
    missing = {"x", "count", "sigma"} - set(data.columns)
    if missing:
        raise InvalidInputError(f"fit data missing columns {sorted(missing)}", key="data")
    x = data["x"].to_numpy(dtype=float)
    y = data["count"].to_numpy(dtype=float)
    sigma = data["sigma"].to_numpy(dtype=float)
    n_params = len(model)

    if n_params == 0:
        raise InvalidInputError("model needs at least one basis function", key="model")
    if len(x) < n_params + 1:
        raise InvalidInputError(f"need at least {n_params + 1} points, got {len(x)}", key="data")
    if np.any(sigma <= 0):
        raise InvalidInputError("sigmas must be > 0", key="sigma")
    if n_params > 1 and np.ptp(x) == 0:
        raise InvalidInputError("singular design: all x identical", key="x")

    design = np.column_stack([np.asarray(f(x), dtype=float) for f in model])
    weighted = design / sigma[:, None]
    if np.linalg.matrix_rank(weighted) < n_params:
        raise InvalidInputError("singular design matrix", key="model")

    params, _, _, _ = np.linalg.lstsq(weighted, y / sigma, rcond=None)
    covariance = np.linalg.inv(weighted.T @ weighted)
    residuals = (y - design @ params) / sigma
    chi2_value = float(np.sum(residuals**2))
    dof = len(x) - n_params
    p_value = float(chi2.sf(chi2_value, dof))

    report = FitReport(
        params=params.tolist(),
        param_sigmas=np.sqrt(np.diag(covariance)).tolist(),
        chi2=chi2_value,
        dof=dof,
        chi2_reduced=chi2_value / dof,
        p_value=p_value,
        rejected_at_5pct=p_value < level,
        residuals=residuals.tolist(),
    )
    logger.info(f"Fit with {n_params} params: chi2 = {chi2_value:.2f} / {dof} dof (p = {p_value:.3g})")
    return report


def runs_test(residuals: Sequence[float]) -> Tuple[float, Optional[float]]:
    """
    Wald-Wolfowitz runs test on residual signs (zeros dropped).

    Returns:
        (z_score, two_sided_p); p is None when one sign is absent
    """
    signs = np.sign(np.asarray(residuals, dtype=float))
    signs = signs[signs != 0]
    n_pos = int(np.sum(signs > 0))
    n_neg = int(np.sum(signs < 0))
    if n_pos == 0 or n_neg == 0:
        return 0.0, None

    runs = 1 + int(np.sum(signs[1:] != signs[:-1]))
    n = n_pos + n_neg
    mean = 2.0 * n_pos * n_neg / n + 1.0
    variance = 2.0 * n_pos * n_neg * (2.0 * n_pos * n_neg - n) / (n**2 * (n - 1))
    if variance <= 0:
        return 0.0, None
    z = (runs - mean) / math.sqrt(variance)
    return z, float(2.0 * norm.sf(abs(z)))
