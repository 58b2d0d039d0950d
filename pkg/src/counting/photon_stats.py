"""
Gated photon counting behind a two-path splitter.
Models heralded-PDC, coherent and thermal sources, simulates per-gate
detections with click detectors, and computes the anticorrelation parameter
alpha = Nc N / (N1 N2) with its uncertainty and expected value.
"""

import math
from typing import Iterable, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import (
    BOOTSTRAP_RESAMPLES,
    GATE_WIDTH_S,
    LAMP_MODE_COUNT,
    PULSER_RATE_HZ,
    SIM_CHUNK_GATES,
    setup_logging,
)
from ..utils import InvalidInputError, validate_positive

logger = setup_logging(__name__)

SourceKind = Literal["heralded_pdc", "coherent", "thermal"]
Seed = Union[int, np.random.SeedSequence]

DEFAULT_SCAN_GATES = 1_000_000


class SourceModel(BaseModel):
    """
    Light source, splitter and detectors of one gated counting experiment.

    For heralded_pdc, mean_per_gate is the heralding fidelity (probability
    that the gate holds the partner photon) and uncorrelated light arrives
    with a Poisson mean of trigger_rate * gate_width * accidental_flux_ratio.
    """

    model_config = ConfigDict(frozen=True)

    kind: SourceKind
    mean_per_gate: float = Field(ge=0.0)
    mode_count_M: int = Field(default=1, ge=1)
    split_ratio: float = Field(default=0.5, ge=0.0, le=1.0)
    eta1: float = Field(default=1.0, ge=0.0, le=1.0)
    eta2: float = Field(default=1.0, ge=0.0, le=1.0)
    dark_per_gate_1: float = Field(default=0.0, ge=0.0)
    dark_per_gate_2: float = Field(default=0.0, ge=0.0)
    trigger_rate: float = Field(default=0.0, ge=0.0)
    gate_width: float = Field(default=GATE_WIDTH_S, ge=0.0)
    accidental_flux_ratio: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _check_kind(self) -> "SourceModel":
        if self.kind == "heralded_pdc" and self.mean_per_gate > 1.0:
            raise ValueError("heralding fidelity (mean_per_gate) must not exceed 1")
        return self

    @property
    def background_per_gate(self) -> float:
        """Mean number of uncorrelated photons per gate (heralded source only)."""
        if self.kind != "heralded_pdc":
            return 0.0
        return self.trigger_rate * self.gate_width * self.accidental_flux_ratio

    @property
    def path_probs(self) -> Tuple[float, float]:
        """Probability that one photon reaches and fires detector 1, detector 2."""
        return self.split_ratio * self.eta1, (1.0 - self.split_ratio) * self.eta2

    @classmethod
    def preset(cls, name: str) -> "SourceModel":
        """Sources of the gated anticorrelation experiment: heralded, laser, lamp."""
        if name == "heralded":
            return cls(kind="heralded_pdc", mean_per_gate=0.8, eta1=0.6, eta2=0.6,
                       trigger_rate=20_000.0, gate_width=GATE_WIDTH_S, accidental_flux_ratio=50.0)
        if name == "laser":
            return cls(kind="coherent", mean_per_gate=0.1, eta1=0.6, eta2=0.6,
                       trigger_rate=PULSER_RATE_HZ)
        if name == "lamp":
            return cls(kind="thermal", mean_per_gate=0.1, mode_count_M=LAMP_MODE_COUNT,
                       eta1=0.6, eta2=0.6, trigger_rate=PULSER_RATE_HZ)
        raise InvalidInputError(f"unknown source preset {name!r}", key="source")


class CountTally(BaseModel):
    """Gate and click totals of one run and the alpha derived from them."""

    gates_N: int = Field(ge=0)
    n1: int = Field(ge=0)
    n2: int = Field(ge=0)
    nc: int = Field(ge=0)
    alpha: float
    alpha_sigma: float
    defined: bool = True

    @model_validator(mode="after")
    def _check_counts(self) -> "CountTally":
        if self.nc > min(self.n1, self.n2):
            raise ValueError("nc must not exceed min(n1, n2)")
        if self.n1 > self.gates_N or self.n2 > self.gates_N:
            raise ValueError("a detector counts at most once per gate")
        return self

    @classmethod
    def from_counts(cls, gates_N: int, n1: int, n2: int, nc: int) -> "CountTally":
        """
        alpha = nc N / (n1 n2) with sigma_alpha / alpha = sqrt(1/nc + 1/n1 + 1/n2).
        nc = 0 gives alpha = 0 with a one-count floor; n1 or n2 = 0 leaves alpha undefined.
        """
        if n1 == 0 or n2 == 0:
            logger.warning(f"alpha undefined: n1={n1}, n2={n2}")
            return cls(gates_N=gates_N, n1=n1, n2=n2, nc=nc,
                       alpha=math.nan, alpha_sigma=math.nan, defined=False)
        scale = gates_N / (n1 * n2)
        if nc == 0:
            return cls(gates_N=gates_N, n1=n1, n2=n2, nc=0, alpha=0.0, alpha_sigma=scale)
        alpha = nc * scale
        sigma = alpha * math.sqrt(1.0 / nc + 1.0 / n1 + 1.0 / n2)
        return cls(gates_N=gates_N, n1=n1, n2=n2, nc=nc, alpha=alpha, alpha_sigma=sigma)


def generating_function(src: SourceModel, z):
    """E[z^n] of the per-gate photon number."""
    z = np.asarray(z, dtype=float)
    mu = src.mean_per_gate
    if src.kind == "coherent":
        return np.exp(-mu * (1.0 - z))
    if src.kind == "thermal":
        m = src.mode_count_M
        return (1.0 + mu * (1.0 - z) / m) ** (-m)
    background = src.background_per_gate
    return (1.0 - mu + mu * z) * np.exp(-background * (1.0 - z))


def click_probabilities(src: SourceModel) -> Tuple[float, float, float]:
    """Per-gate probabilities (P1, P2, P12) of click detectors with dark counts."""
    p1, p2 = src.path_probs
    quiet1 = math.exp(-src.dark_per_gate_1)
    quiet2 = math.exp(-src.dark_per_gate_2)
    q1 = quiet1 * float(generating_function(src, 1.0 - p1))
    q2 = quiet2 * float(generating_function(src, 1.0 - p2))
    q12 = quiet1 * quiet2 * float(generating_function(src, 1.0 - p1 - p2))
    return 1.0 - q1, 1.0 - q2, 1.0 - q1 - q2 + q12


def _rare_detection_alpha(src: SourceModel) -> float:
    if src.kind == "coherent":
        return 1.0
    if src.kind == "thermal":
        return 1.0 + 1.0 / src.mode_count_M
    p1, p2 = src.path_probs
    b = src.background_per_gate
    signal1, signal2 = src.mean_per_gate * p1, src.mean_per_gate * p2
    accidental1 = b * p1 + src.dark_per_gate_1
    accidental2 = b * p2 + src.dark_per_gate_2
    denominator = (signal1 + accidental1) * (signal2 + accidental2)
    if denominator == 0:
        return math.nan
    return (signal1 * accidental2 + signal2 * accidental1 + accidental1 * accidental2) / denominator


def expected_alpha(src: SourceModel, rare_detection_limit: bool = False) -> float:
    """
    Expected alpha. By default exact for click detectors at the model's
    detection probabilities; rare_detection_limit gives the low-count limit
    (coherent 1, thermal 1 + 1/M, heralded accidentals formula).
    """
    if rare_detection_limit:
        return _rare_detection_alpha(src)
    prob1, prob2, prob12 = click_probabilities(src)
    if prob1 * prob2 == 0:
        logger.warning("A detector never fires; alpha undefined")
        return math.nan
    return prob12 / (prob1 * prob2)


def _photon_numbers(src: SourceModel, n: int, rng: np.random.Generator) -> np.ndarray:
    mu = src.mean_per_gate
    if src.kind == "coherent":
        return rng.poisson(mu, n)
    if src.kind == "thermal":
        if mu == 0:
            return np.zeros(n, dtype=np.int64)
        # sum of M Bose-Einstein modes of mean mu/M
        m = src.mode_count_M
        return rng.negative_binomial(m, 1.0 / (1.0 + mu / m), n)
    heralded = (rng.random(n) < mu).astype(np.int64)
    return heralded + rng.poisson(src.background_per_gate, n)


def _simulate_chunk(src: SourceModel, n: int, seed: np.random.SeedSequence) -> np.ndarray:
    rng = np.random.default_rng(seed)
    photons = _photon_numbers(src, n, rng)
    to_path1 = rng.binomial(photons, src.split_ratio)
    to_path2 = photons - to_path1
    click1 = rng.binomial(to_path1, src.eta1) > 0
    click2 = rng.binomial(to_path2, src.eta2) > 0
    click1 |= rng.random(n) < -math.expm1(-src.dark_per_gate_1)
    click2 |= rng.random(n) < -math.expm1(-src.dark_per_gate_2)
    return np.array([n, click1.sum(), click2.sum(), (click1 & click2).sum()], dtype=np.int64)


def simulate_gates(src: SourceModel, n_gates: int, seed: Seed,
                   chunk_size: int = SIM_CHUNK_GATES, n_jobs: int = 1) -> CountTally:
    """
    Simulate n_gates counting gates. Gates are processed in chunks, each with
    its own child seed, and the tallies summed; results depend only on the
    seed and chunk_size, not on n_jobs.
    """
    if n_gates <= 0:
        raise InvalidInputError(f"n_gates must be > 0, got {n_gates}", key="n_gates")
    if chunk_size <= 0:
        raise InvalidInputError("chunk_size must be > 0", key="chunk_size")

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n_chunks = -(-n_gates // chunk_size)
    sizes = [chunk_size] * (n_chunks - 1) + [n_gates - chunk_size * (n_chunks - 1)]
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_simulate_chunk)(src, size, child)
        for size, child in zip(sizes, root.spawn(n_chunks))
    )
    gates, n1, n2, nc = (int(v) for v in np.sum(parts, axis=0))
    tally = CountTally.from_counts(gates, n1, n2, nc)
    logger.info(f"{src.kind}: N={gates}, N1={n1}, N2={n2}, Nc={nc}, "
                f"alpha={tally.alpha:.4f} +/- {tally.alpha_sigma:.4f}")
    return tally


def bootstrap_alpha_sigma(tally: CountTally, n_resamples: int = BOOTSTRAP_RESAMPLES,
                          seed: int = 0) -> float:
    """Spread of alpha under multinomial resampling of the four per-gate outcome classes."""
    if tally.gates_N == 0:
        raise InvalidInputError("empty tally", key="gates_N")
    classes = np.array([
        tally.nc,
        tally.n1 - tally.nc,
        tally.n2 - tally.nc,
        tally.gates_N - tally.n1 - tally.n2 + tally.nc,
    ], dtype=float)
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(tally.gates_N, classes / tally.gates_N, size=n_resamples)
    nc = draws[:, 0]
    n1 = draws[:, 0] + draws[:, 1]
    n2 = draws[:, 0] + draws[:, 2]
    valid = (n1 > 0) & (n2 > 0)
    if valid.sum() < 2:
        return math.nan
    alphas = nc[valid] * tally.gates_N / (n1[valid].astype(float) * n2[valid])
    return float(np.std(alphas, ddof=1))


def alpha_vs_rate_scan(src: SourceModel, trigger_rates: Iterable[float], seed: int,
                       n_gates: int = DEFAULT_SCAN_GATES,
                       acquisition_s: Optional[float] = None) -> pd.DataFrame:
    """
    Simulated and expected alpha at each trigger rate. With acquisition_s the
    gate count follows the rate (one gate per trigger); otherwise n_gates.
    """
    rates = [float(r) for r in trigger_rates]
    if not rates:
        raise InvalidInputError("trigger_rates is empty", key="trigger_rates")
    if any(r <= 0 for r in rates):
        raise InvalidInputError("trigger rates must be > 0", key="trigger_rates")
    if acquisition_s is not None:
        validate_positive(acquisition_s, "acquisition_s")
        if min(rates) * acquisition_s < 1:
            raise InvalidInputError(
                f"acquisition_s={acquisition_s:g} gives no gate at {min(rates):g} Hz", key="acquisition_s")

    rows = []
    for rate, child in zip(rates, np.random.SeedSequence(seed).spawn(len(rates))):
        point = src.model_copy(update={"trigger_rate": rate})
        gates = int(rate * acquisition_s) if acquisition_s is not None else n_gates
        tally = simulate_gates(point, gates, child)
        rows.append({
            "trigger_rate_hz": rate,
            "gates": tally.gates_N,
            "n1": tally.n1,
            "n2": tally.n2,
            "nc": tally.nc,
            "alpha": tally.alpha,
            "alpha_sigma": tally.alpha_sigma,
            "expected_alpha": expected_alpha(point),
        })
    return pd.DataFrame(rows, columns=["trigger_rate_hz", "gates", "n1", "n2", "nc",
                                       "alpha", "alpha_sigma", "expected_alpha"])
