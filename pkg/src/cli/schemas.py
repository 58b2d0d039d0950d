"""
Run configuration schema.
Every physical quantity carries its unit in the key name; unknown keys are
rejected so a misspelt parameter fails loudly instead of falling back to a
default.
"""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..config import (
    CONFIG_VERSION,
    DET1_DISTANCE_M,
    DET2_DISTANCE_M,
    GATE_WIDTH_S,
    GRID_STEP_DEG,
    IRIS_APERTURE_M,
    MEAN_WAVELENGTH_M,
    SANTOS_ABSORB_S,
    SANTOS_ACTIVE_RADIUS_M,
    SANTOS_COHERENCE_S,
    SANTOS_DEPTH_M,
    SANTOS_DISTANCE_M,
    SANTOS_ETA,
    SANTOS_FOCAL_M,
    SCAN_FIXED_X2_M,
    SLIT_SEPARATION_M,
    SLIT_WAVELENGTH_M,
    SLIT_WIDTH_M,
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class StateConfig(StrictModel):
    f: float = Field(default=1.0, ge=0.0)
    f_phase_deg: float = 0.0
    alignment: float = Field(default=1.0, ge=0.0, le=1.0)


class TransmissionConfig(StrictModel):
    eps1_par: float = Field(default=1.0, ge=0.0, le=1.0)
    eps1_perp: float = Field(default=0.0, ge=0.0, le=1.0)
    eps2_par: float = Field(default=1.0, ge=0.0, le=1.0)
    eps2_perp: float = Field(default=0.0, ge=0.0, le=1.0)


class BellConfig(StrictModel):
    objective: Literal["ch", "ratio"] = "ch"
    grid_step_deg: float = Field(default=GRID_STEP_DEG, gt=0.0, le=3.0)
    fixed_theta2_deg: float = 45.0
    scan_points: int = Field(default=181, ge=3)
    compare_f: Optional[float] = Field(default=None, ge=0.0)


class LoopholeConfig(StrictModel):
    f_min: float = Field(default=0.0, ge=0.0)
    f_max: float = Field(default=1.0, gt=0.0)
    f_steps: int = Field(default=50, ge=2)
    eta_min: float = Field(default=0.6, gt=0.0, le=1.0)
    eta_max: float = Field(default=1.0, gt=0.0, le=1.0)
    eta_steps: int = Field(default=50, ge=2)
    background: float = Field(default=0.0, ge=0.0)
    critical_f: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4, 0.7, 1.0])


class SantosConfig(StrictModel):
    eta: float = Field(default=SANTOS_ETA, gt=0.0, le=1.0)
    focal_m: float = Field(default=SANTOS_FOCAL_M, gt=0.0)
    active_radius_m: float = Field(default=SANTOS_ACTIVE_RADIUS_M, gt=0.0)
    distance_m: float = Field(default=SANTOS_DISTANCE_M, gt=0.0)
    coherence_s: float = Field(default=SANTOS_COHERENCE_S, gt=0.0)
    wavelength_m: float = Field(default=MEAN_WAVELENGTH_M, gt=0.0)
    depth_m: float = Field(default=SANTOS_DEPTH_M, gt=0.0)
    absorb_s: float = Field(default=SANTOS_ABSORB_S, gt=0.0)
    singles_rate_hz: Optional[float] = Field(default=None, gt=0.0)


class VisibilityConfig(StrictModel):
    n0: float = Field(default=8764.0, ge=0.0)
    n90: float = Field(default=1236.0, ge=0.0)
    n22p5: float = Field(default=8133.0, ge=0.0)
    n67p5: float = Field(default=1867.0, ge=0.0)
    eta: float = Field(default=SANTOS_ETA, ge=0.0, le=1.0)


class SlitConfig(StrictModel):
    separation_m: float = Field(default=SLIT_SEPARATION_M, gt=0.0)
    width_m: float = Field(default=SLIT_WIDTH_M, gt=0.0)
    wavelength_m: float = Field(default=SLIT_WAVELENGTH_M, gt=0.0)
    incidence_a_deg: float = 0.0
    incidence_b_deg: float = 0.0
    det1_distance_m: float = Field(default=DET1_DISTANCE_M, gt=0.0)
    det2_distance_m: float = Field(default=DET2_DISTANCE_M, gt=0.0)
    aperture1_m: float = Field(default=IRIS_APERTURE_M, ge=0.0)
    aperture2_m: float = Field(default=0.0, ge=0.0)
    fixed_x2_m: float = SCAN_FIXED_X2_M
    x1_min_m: float = -0.03
    x1_max_m: float = 0.03
    points: int = Field(default=121, ge=3)
    peak_counts: float = Field(default=1000.0, ge=0.0)
    background_counts: float = Field(default=200.0, ge=0.0)


class AlphaConfig(StrictModel):
    source: Literal["heralded", "laser", "lamp", "coherent", "thermal", "heralded_pdc"] = "laser"
    mean_per_gate: Optional[float] = Field(default=None, ge=0.0)
    mode_count: Optional[int] = Field(default=None, ge=1)
    split_ratio: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    eta1: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    eta2: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    dark_per_gate_1: Optional[float] = Field(default=None, ge=0.0)
    dark_per_gate_2: Optional[float] = Field(default=None, ge=0.0)
    trigger_rate_hz: Optional[float] = Field(default=None, ge=0.0)
    gate_width_s: Optional[float] = Field(default=None, ge=0.0)
    accidental_flux_ratio: Optional[float] = Field(default=None, ge=0.0)
    gates: int = Field(default=1_000_000, gt=0)
    rates_hz: List[float] = Field(default_factory=lambda: [2000.0, 4000.0, 6000.0, 10000.0, 15000.0, 20000.0])
    rare_detection_limit: bool = False
    bootstrap_resamples: int = Field(default=200, ge=0)


class CountsConfig(StrictModel):
    rate1_hz: float = Field(default=1e5, gt=0.0)
    rate2_hz: float = Field(default=1e5, gt=0.0)
    window_s: float = Field(default=GATE_WIDTH_S, ge=0.0)
    duration_s: float = Field(default=1.0, gt=0.0)
    simulate: bool = False


class RunConfig(StrictModel):
    """Complete parameter document of one command run."""

    version: Literal["1"] = CONFIG_VERSION
    seed: int = Field(default=0, ge=0)
    state: StateConfig = Field(default_factory=StateConfig)
    transmissions: TransmissionConfig = Field(default_factory=TransmissionConfig)
    bell: BellConfig = Field(default_factory=BellConfig)
    loophole: LoopholeConfig = Field(default_factory=LoopholeConfig)
    santos: SantosConfig = Field(default_factory=SantosConfig)
    visibility: VisibilityConfig = Field(default_factory=VisibilityConfig)
    slit: SlitConfig = Field(default_factory=SlitConfig)
    alpha: AlphaConfig = Field(default_factory=AlphaConfig)
    counts: CountsConfig = Field(default_factory=CountsConfig)
