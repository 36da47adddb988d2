"""Discrete noise-level grids and per-step fractions.

A schedule is a strictly increasing grid sigma_0 < sigma_1 < ... < sigma_T
with sigma_0 = 0 for the linear family, traversed backwards (t = T down to 0)
by every sampler. The per-step fraction eta_t = (sigma_t - sigma_{t-1}) /
sigma_t is the exact Euler coefficient of the variance-exploding probability
flow written in terms of the denoiser output:

    x_{t-1} = x_t + eta_t * (xhat_0 - x_t)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NoiseSchedule",
    "build_linear_schedule",
    "build_power_schedule",
    "step_fraction",
]


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Immutable noise grid. sigma_values[t] is the level at step index t."""

    kind: str
    sigma_values: np.ndarray
    num_steps: int = field(init=False)

    def __post_init__(self):
        sig = np.asarray(self.sigma_values, dtype=np.float64)
        object.__setattr__(self, "sigma_values", sig)
        object.__setattr__(self, "num_steps", len(sig) - 1)
        if sig.ndim != 1 or len(sig) < 2:
            raise ValueError("schedule needs at least two sigma values")
        if not np.all(np.isfinite(sig)):
            raise ValueError("schedule contains non-finite sigma")
        if sig[0] < 0:
            raise ValueError("sigma_0 must be non-negative")
        if not np.all(np.diff(sig) > 0):
            raise ValueError("sigma grid must be strictly increasing")

    @property
    def sigma_max(self) -> float:
        return float(self.sigma_values[-1])

    def to_manifest(self) -> dict:
        return {
            "kind": self.kind,
            "T": self.num_steps,
            "sigma_values": self.sigma_values.tolist(),
        }


def build_linear_schedule(T: int, sigma_max: float) -> NoiseSchedule:
    """Uniform grid sigma_t = sigma_max * t / T, with sigma_0 = 0 exactly."""
    if T < 1:
        raise ValueError("T must be a positive integer")
    if sigma_max <= 0:
        raise ValueError("sigma_max must be positive")
    sig = sigma_max * np.arange(T + 1, dtype=np.float64) / T
    sig[0] = 0.0
    return NoiseSchedule(kind="linear", sigma_values=sig)


def build_power_schedule(
    T: int, sigma_min: float, sigma_max: float, rho_exp: float = 7.0
) -> NoiseSchedule:
    """Power-law grid: interpolate sigma^(1/rho) endpoints linearly, raise back.

    sigma_1 = sigma_min and sigma_T = sigma_max exactly; sigma_0 = 0 is
    appended so the final step fully denoises. Needs T >= 2 to pin both
    endpoints.
    """
    if T < 2:
        raise ValueError("power schedule needs T >= 2 to pin both endpoints")
    if not (0 < sigma_min < sigma_max):
        raise ValueError("need 0 < sigma_min < sigma_max")
    if rho_exp <= 0:
        raise ValueError("rho_exp must be positive")
    lo = sigma_min ** (1.0 / rho_exp)
    hi = sigma_max ** (1.0 / rho_exp)
    ramp = lo + (hi - lo) * np.arange(T, dtype=np.float64) / (T - 1)
    sig = np.concatenate([[0.0], ramp**rho_exp])
    sig[1] = sigma_min
    sig[-1] = sigma_max
    return NoiseSchedule(kind="power", sigma_values=sig)


def step_fraction(
    sigma_t: float, sigma_prev: float, denominator_mode: str = "current"
) -> float:
    """Euler fraction eta_t for the step sigma_t -> sigma_prev.

    mode="current" divides by sigma_t; mode="previous" divides by sigma_{t-1}
    (an alternative integrator variant, kept switchable rather than resolved).
    """
    if sigma_prev >= sigma_t:
        raise ValueError("sigma_prev must be strictly below sigma_t")
    if denominator_mode == "current":
        return (sigma_t - sigma_prev) / sigma_t
    if denominator_mode == "previous":
        if sigma_prev == 0.0:
            raise ZeroDivisionError("previous-mode eta undefined at sigma_prev=0")
        return (sigma_t - sigma_prev) / sigma_prev
    raise ValueError(f"unknown denominator_mode: {denominator_mode!r}")
