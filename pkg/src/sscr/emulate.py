"""Reduced-rank subspace channel emulation on a DPSS time basis."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import AntennaPattern, CtfBlock, FilterResponse, ctf_snapshot
from .dpss import dpss
from .geometry import SamplingGrid
from .mpc import MpcSet

NMSE_FLOOR_DB = -300.0


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """``U`` is ``(D, M)`` with orthonormal rows band-limited to ``nu_max * t_snap``."""

    U: np.ndarray
    nu_max_hz: float
    t_snap: float

    @property
    def D(self) -> int:
        return self.U.shape[0]

    @property
    def M(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class EmulatorBudget:
    bandwidth_B: float
    delay_support_T_D: float
    bits_per_sample_c1: float
    rate_dense_R: float
    rate_subspace: float
    rate_block_refresh: float
    refresh_factor: float
    D: int
    M: int
    Q: int
    t_snap: float
    nu_max_hz: float

    @property
    def reduction(self) -> float:
        return self.rate_dense_R / self.rate_subspace

    def to_json(self) -> dict:
        return {
            "B_hz": self.bandwidth_B,
            "T_D_s": self.delay_support_T_D,
            "c1_bits": self.bits_per_sample_c1,
            "rate_dense_bps": self.rate_dense_R,
            "rate_subspace_bps": self.rate_subspace,
            "reduction": self.reduction,
            "rate_block_refresh_bps": self.rate_block_refresh,
            "refresh_factor": self.refresh_factor,
            "D": self.D,
            "M": self.M,
            "Q": self.Q,
            "t_snap_s": self.t_snap,
            "nu_max_hz": self.nu_max_hz,
        }


def base_dimension(M: int, t_snap: float, nu_max_hz: float) -> int:
    """``2 ceil(nu_max M t_snap) + 1``; products within 1e-9 of an integer are not rounded up."""
    return 2 * math.ceil(nu_max_hz * M * t_snap - 1e-9) + 1


def subspace_basis(M: int, t_snap: float, nu_max_hz: float, D_extra: int = 0) -> SubspaceBasis:
    W = nu_max_hz * t_snap
    if not nu_max_hz > 0:
        raise ValueError("nu_max must be > 0")
    if not W < 0.5:
        raise ValueError(
            f"maximum Doppler {nu_max_hz} Hz exceeds the snapshot-rate Nyquist limit {0.5 / t_snap} Hz"
        )
    D = base_dimension(M, t_snap, nu_max_hz) + int(D_extra)
    if not 1 <= D <= M:
        raise ValueError(f"subspace dimension D={D} must lie in [1, M={M}]")
    return SubspaceBasis(dpss(M, W, D).sequences, nu_max_hz, t_snap)


def _check(block_m: int, basis: SubspaceBasis):
    if basis.M != block_m:
        raise ValueError(f"basis length {basis.M} does not match block length {block_m}")


def project_and_reconstruct(ctf_exact: CtfBlock, basis: SubspaceBasis) -> CtfBlock:
    """Rank-``D`` projection of every subcarrier's time series.

    The emulator stores ``D * Q`` coefficients ``U g`` per block and rebuilds
    ``U^T (U g)``.
    """
    _check(ctf_exact.g.shape[0], basis)
    coeffs = basis.U @ ctf_exact.g
    return CtfBlock(basis.U.T @ coeffs, ctf_exact.grid)


def project_mpcs(
    mpc_sets: Sequence[MpcSet],
    grid: SamplingGrid,
    basis: SubspaceBasis,
    tx_pattern: AntennaPattern | None = None,
    rx_pattern: AntennaPattern | None = None,
    filt: FilterResponse | None = None,
) -> CtfBlock:
    """Per-path variant: each path's time-varying contribution is projected
    separately and the reconstructions are summed.

    Paths are tracked across snapshots by :attr:`Mpc.key`; a path absent
    from a snapshot contributes zero there.
    """
    _check(len(mpc_sets), basis)
    by_path: dict[tuple, dict[int, object]] = defaultdict(dict)
    for m, mset in enumerate(mpc_sets):
        for p in mset:
            by_path[p.key][m] = p
    out = np.zeros((grid.M, grid.Q), dtype=complex)
    for key in sorted(by_path, key=repr):
        contrib = np.zeros((grid.M, grid.Q), dtype=complex)
        for m, p in by_path[key].items():
            contrib[m] = ctf_snapshot([p], grid, tx_pattern, rx_pattern, filt)
        out += basis.U.T @ (basis.U @ contrib)
    return CtfBlock(out, grid)


def emulation_nmse(exact: CtfBlock | np.ndarray, approx: CtfBlock | np.ndarray) -> float:
    """``10 log10(||exact - approx||^2 / ||exact||^2)`` floored at -300 dB."""
    e = exact.g if isinstance(exact, CtfBlock) else np.asarray(exact)
    a = approx.g if isinstance(approx, CtfBlock) else np.asarray(approx)
    if e.shape != a.shape:
        raise ValueError(f"block shapes differ: {e.shape} vs {a.shape}")
    ref = np.sum(np.abs(e) ** 2)
    if ref == 0:
        raise ValueError("NMSE undefined for a zero-energy exact block")
    err = np.sum(np.abs(e - a) ** 2) / ref
    if err == 0:
        return NMSE_FLOOR_DB
    return max(float(10 * np.log10(err)), NMSE_FLOOR_DB)


def budget_report(
    grid: SamplingGrid,
    nu_max_hz: float,
    D: int,
    c1_bits: float,
    delay_support_s: float | None = None,
) -> EmulatorBudget:
    """Link data rates of a dense tap-delay-line emulator vs. the subspace one.

    Dense: ``B * T_D`` taps refreshed at the sample rate ``B``, so
    ``R = c1 * B^2 * T_D`` (refresh factor 1). Subspace: ``D * Q`` coefficients
    per block of ``M * t_snap`` seconds. ``T_D`` defaults to the full delay
    window ``Q * T_s`` and is never taken below one tap ``T_s``.
    """
    B = grid.bandwidth_B
    T_D = grid.max_delay if delay_support_s is None else max(float(delay_support_s), grid.T_s)
    refresh_factor = 1.0
    block_time = grid.M * grid.t_snap
    return EmulatorBudget(
        bandwidth_B=B,
        delay_support_T_D=T_D,
        bits_per_sample_c1=c1_bits,
        rate_dense_R=c1_bits * B**2 * T_D * refresh_factor,
        rate_subspace=c1_bits * D * grid.Q / block_time,
        rate_block_refresh=c1_bits * grid.M * grid.Q / block_time,
        refresh_factor=refresh_factor,
        D=int(D),
        M=grid.M,
        Q=grid.Q,
        t_snap=grid.t_snap,
        nu_max_hz=nu_max_hz,
    )


def delay_span(mpc_sets: Sequence[MpcSet]) -> float:
    """Largest spread between first and last path delay over a block."""
    spans = [max(p.delay_s for p in s) - min(p.delay_s for p in s) for s in mpc_sets if len(s)]
    return max(spans) if spans else 0.0
