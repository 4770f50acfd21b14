"""Time-variant channel transfer function synthesis.

``g[m, q] = gamma_q * sum_p eta_p * xi_R(beta_p) * xi_T(alpha_p) * exp(-j 2 pi theta_p q)``
with ``theta_p = tau_p / (T_s Q)`` and ``q = -Q/2 .. Q/2 - 1``. Column ``k`` of a
:class:`CtfBlock` holds subcarrier ``q = k - Q/2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import SamplingGrid, Scenario
from .mpc import Mpc, MpcSet, block_mpc_sets
from .scatter import PointScatterer


class DelayWindowError(ValueError):
    """A path delay falls outside the unambiguous window ``Q * T_s``."""


@dataclass(frozen=True, eq=False)
class AntennaPattern:
    """Isotropic or tabulated complex antenna gain.

    Tabulated gains are given on an azimuth grid spanning a full turn (wrapped)
    and an elevation grid covering ``[-pi/2, pi/2]``; ``gains`` has shape
    ``(n_elevation, n_azimuth)`` and is interpolated bilinearly.
    """

    kind: str = "isotropic"
    azimuth: np.ndarray | None = None
    elevation: np.ndarray | None = None
    gains: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "isotropic":
            return
        if self.kind != "tabulated":
            raise ValueError(f"unknown antenna pattern kind {self.kind!r}")
        az = np.asarray(self.azimuth, dtype=float)
        el = np.asarray(self.elevation, dtype=float)
        gains = np.asarray(self.gains, dtype=complex)
        if gains.shape != (el.size, az.size):
            raise ValueError("pattern gains must have shape (n_elevation, n_azimuth)")
        if np.any(np.diff(az) <= 0) or np.any(np.diff(el) <= 0):
            raise ValueError("pattern grids must be strictly increasing")
        if az[-1] - az[0] >= 2 * np.pi or az.size < 2:
            raise ValueError("azimuth grid must hold at least two samples within one turn")
        if not (np.isclose(el[0], -np.pi / 2) and np.isclose(el[-1], np.pi / 2)):
            raise ValueError("elevation grid must cover [-pi/2, pi/2]")
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)
        object.__setattr__(self, "gains", gains)

    @classmethod
    def isotropic(cls) -> "AntennaPattern":
        return cls()

    def gain(self, directions: np.ndarray) -> np.ndarray:
        """Complex gain for unit direction vectors of shape ``(..., 3)``."""
        directions = np.asarray(directions, dtype=float)
        if self.kind == "isotropic":
            return np.ones(directions.shape[:-1], dtype=complex)
        az = np.arctan2(directions[..., 1], directions[..., 0])
        el = np.arcsin(np.clip(directions[..., 2], -1.0, 1.0))
        # azimuth index on the periodic grid
        grid_az = np.append(self.azimuth, self.azimuth[0] + 2 * np.pi)
        a = np.mod(az - self.azimuth[0], 2 * np.pi) + self.azimuth[0]
        ia = np.clip(np.searchsorted(grid_az, a, side="right") - 1, 0, self.azimuth.size - 1)
        fa = (a - grid_az[ia]) / (grid_az[ia + 1] - grid_az[ia])
        ia1 = (ia + 1) % self.azimuth.size
        ie = np.clip(np.searchsorted(self.elevation, el, side="right") - 1, 0, self.elevation.size - 2)
        fe = np.clip((el - self.elevation[ie]) / (self.elevation[ie + 1] - self.elevation[ie]), 0.0, 1.0)
        g = self.gains
        return (
            (1 - fe) * ((1 - fa) * g[ie, ia] + fa * g[ie, ia1])
            + fe * ((1 - fa) * g[ie + 1, ia] + fa * g[ie + 1, ia1])
        )


@dataclass(frozen=True, eq=False)
class FilterResponse:
    gamma_q: np.ndarray

    @classmethod
    def ones(cls, Q: int) -> "FilterResponse":
        return cls(np.ones(Q, dtype=complex))

    @classmethod
    def raised_cosine(cls, Q: int, rolloff: float) -> "FilterResponse":
        """Flat passband with cosine-tapered band edges over a ``rolloff`` fraction."""
        if not 0 <= rolloff <= 1:
            raise ValueError("rolloff must be in [0, 1]")
        q = np.abs(np.arange(-Q // 2, Q // 2) + 0.5)
        flat = (1 - rolloff) * Q / 2
        gamma = np.ones(Q)
        edge = q > flat
        if rolloff > 0:
            gamma[edge] = 0.5 * (1 + np.cos(np.pi * (q[edge] - flat) / (rolloff * Q / 2)))
        return cls(gamma.astype(complex))


@dataclass(frozen=True, eq=False)
class CtfBlock:
    g: np.ndarray
    grid: SamplingGrid

    def __post_init__(self):
        g = np.asarray(self.g, dtype=complex)
        if g.shape != (self.grid.M, self.grid.Q):
            raise ValueError(f"CTF block shape {g.shape} does not match grid ({self.grid.M}, {self.grid.Q})")
        if not np.all(np.isfinite(g)):
            raise ValueError("CTF block entries must be finite")
        object.__setattr__(self, "g", g)


def ctf_snapshot(
    mpcs: MpcSet | Sequence[Mpc],
    grid: SamplingGrid,
    tx_pattern: AntennaPattern | None = None,
    rx_pattern: AntennaPattern | None = None,
    filt: FilterResponse | None = None,
) -> np.ndarray:
    """Frequency response of one snapshot, length ``Q``."""
    paths = list(mpcs)
    Q = grid.Q
    gamma = np.ones(Q, dtype=complex) if filt is None else np.asarray(filt.gamma_q)
    if gamma.shape != (Q,):
        raise ValueError(f"filter response must have length Q={Q}")
    if not paths:
        return np.zeros(Q, dtype=complex)
    delays = np.array([p.delay_s for p in paths])
    theta = delays / (grid.T_s * Q)
    bad = np.nonzero((theta >= 1) | (theta < 0))[0]
    if bad.size:
        p = paths[bad[0]]
        raise DelayWindowError(
            f"MPC {p.kind} {p.chain or p.scatterer_id or ''} delay {p.delay_s:.6e} s outside window "
            f"[0, {grid.max_delay:.6e}) s (theta={theta[bad[0]]:.4f})"
        )
    eta = np.array([p.amplitude for p in paths], dtype=complex)
    if tx_pattern is not None and tx_pattern.kind != "isotropic":
        eta = eta * tx_pattern.gain(np.array([p.departure_dir for p in paths]))
    if rx_pattern is not None and rx_pattern.kind != "isotropic":
        eta = eta * rx_pattern.gain(np.array([p.arrival_dir for p in paths]))
    q = grid.freq_indices()
    return gamma * (np.exp(-2j * np.pi * np.outer(q, theta)) @ eta)


def simulate_block(
    scenario: Scenario,
    block_start: float = 0.0,
    mode: str = "per_snapshot",
    region_length: int | None = None,
    max_order: int = 2,
    prune_floor_db: float = 40.0,
    tx_pattern: AntennaPattern | None = None,
    rx_pattern: AntennaPattern | None = None,
    filt: FilterResponse | None = None,
    scatterers: Sequence[PointScatterer] | None = None,
) -> tuple[CtfBlock, list[MpcSet]]:
    """CTF block together with the per-snapshot path sets it was built from."""
    sets = block_mpc_sets(scenario, block_start, mode, region_length, max_order, prune_floor_db, scatterers)
    g = np.stack([ctf_snapshot(s, scenario.grid, tx_pattern, rx_pattern, filt) for s in sets])
    return CtfBlock(g, scenario.grid), sets


def ctf_block(
    scenario: Scenario,
    block_start: float = 0.0,
    mode: str = "per_snapshot",
    region_length: int | None = None,
    max_order: int = 2,
    prune_floor_db: float = 40.0,
    tx_pattern: AntennaPattern | None = None,
    rx_pattern: AntennaPattern | None = None,
    filt: FilterResponse | None = None,
    scatterers: Sequence[PointScatterer] | None = None,
) -> CtfBlock:
    return simulate_block(
        scenario, block_start, mode, region_length, max_order, prune_floor_db, tx_pattern, rx_pattern, filt, scatterers
    )[0]


def apply_channel(ctf: CtfBlock, tx_symbols: np.ndarray) -> np.ndarray:
    """Per-snapshot multiplicative channel ``y[m, q] = g[m, q] * x[m, q]``."""
    x = np.asarray(tx_symbols)
    if x.shape != ctf.g.shape:
        raise ValueError(f"symbol matrix shape {x.shape} does not match CTF block {ctf.g.shape}")
    return ctf.g * x


def impulse_response(g_row: np.ndarray) -> np.ndarray:
    """Delay-domain taps ``h[n]`` of one snapshot (inverse DFT over ``q``)."""
    return np.fft.ifft(np.fft.ifftshift(g_row))
