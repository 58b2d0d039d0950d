"""
Shared utilities for the PDC entanglement toolkit.
Error types, input validators, angle normalisation and run identifiers.
"""

import hashlib
import json
import math
from typing import Any, Sequence, Tuple

import numpy as np

from .config import setup_logging

logger = setup_logging(__name__)


class ToolkitError(Exception):
    """Base class for toolkit failures."""


class InvalidInputError(ToolkitError, ValueError):
    """An input violates an operation's preconditions."""

    def __init__(self, message: str, key: str = None):
        super().__init__(message)
        self.key = key


class ConvergenceError(ToolkitError, RuntimeError):
    """A numerical procedure failed to converge or to bracket a root."""


def validate_probability(value: float, name: str = "value") -> float:
    """Validate that value lies in [0, 1]."""
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise InvalidInputError(f"{name} must lie in [0, 1], got {value}", key=name)
    return float(value)


def validate_positive(value: float, name: str = "value") -> float:
    """Validate that value is strictly positive and finite."""
    if not (value > 0.0) or not math.isfinite(value):
        raise InvalidInputError(f"{name} must be strictly positive, got {value}", key=name)
    return float(value)


def normalize_angle(theta):
    """Reduce an angle (radians, scalar or array) to [0, pi)."""
    reduced = np.mod(theta, math.pi)
    # mod can return pi itself for tiny negative inputs
    reduced = np.where(np.isclose(reduced, math.pi, rtol=0.0, atol=1e-12), 0.0, reduced)
    if np.ndim(reduced) == 0:
        return float(reduced)
    return reduced


def deg2rad_normalized(angle_deg: float) -> float:
    """Convert a CLI angle in degrees to radians in [0, pi)."""
    return normalize_angle(math.radians(angle_deg))


def canonical_json(payload: Any) -> str:
    """Serialize payload with sorted keys and no whitespace variation."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)


def run_id(payload: Any) -> str:
    """Content address of a run: first 12 hex digits of sha256(canonical JSON)."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:12]


def weighted_mean(values: Sequence[float], sigmas: Sequence[float]) -> Tuple[float, float]:
    """
    Inverse-variance weighted mean.

    Returns:
        (mean, sigma_of_mean)
    """
    values = np.asarray(values, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    if values.size == 0 or values.shape != sigmas.shape:
        raise InvalidInputError("weighted_mean needs matching non-empty values and sigmas")
    if np.any(sigmas <= 0):
        raise InvalidInputError("weighted_mean needs strictly positive sigmas", key="sigmas")

    weights = 1.0 / sigmas**2
    mean = float(np.sum(weights * values) / np.sum(weights))
    sigma = float(1.0 / math.sqrt(np.sum(weights)))
    return mean, sigma
