"""Backscatter link budget for mono- and bi-static sensing."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import SPEED_OF_LIGHT


@dataclass(frozen=True)
class RadarTarget:
    sigma_m2: float
    d1_m: float
    d2_m: float

    def __post_init__(self):
        for name in ("sigma_m2", "d1_m", "d2_m"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite number, got {val}")


def free_space_loss_db(d_m: float, f_hz: float) -> float:
    """Friis loss ``20 log10(4 pi d / lambda)``."""
    return 20 * math.log10(4 * math.pi * d_m * f_hz / SPEED_OF_LIGHT)


def backscatter_pathloss_db(target: RadarTarget, f_hz: float) -> float:
    """``L(d1) + L(d2) + 10 log10(lambda^2 / 4 pi) - 10 log10(sigma)``.

    With Friis one-way losses this equals the bistatic radar-equation loss
    ``10 log10((4 pi)^3 d1^2 d2^2 / (sigma lambda^2))``.
    """
    if not (math.isfinite(f_hz) and f_hz > 0):
        raise ValueError(f"frequency must be positive, got {f_hz}")
    lam = SPEED_OF_LIGHT / f_hz
    return (
        free_space_loss_db(target.d1_m, f_hz)
        + free_space_loss_db(target.d2_m, f_hz)
        + 10 * math.log10(lam**2 / (4 * math.pi))
        - 10 * math.log10(target.sigma_m2)
    )


def target_return_power_dbm(pt_dbm: float, gains_dbi: tuple[float, float], target: RadarTarget, f_hz: float) -> float:
    """Received target echo power for TX/RX antenna gains ``(G_t, G_r)`` in dBi."""
    g_t, g_r = gains_dbi
    return pt_dbm + g_t + g_r - backscatter_pathloss_db(target, f_hz)
