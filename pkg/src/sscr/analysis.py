"""Local scattering function estimation and derived channel statistics.

The multitaper estimate over region ``s`` of length ``M`` is

    C[n, r] = 1/(IJ) sum_w | sum_{m', q} g[m' + M s, q] G_w[m', q]
                              exp(-j 2 pi (r m' / M - n q / Q)) |^2

with ``m'`` and ``r`` in ``-M/2 .. M/2 - 1``, ``q`` in ``-Q/2 .. Q/2 - 1`` and
``n`` in ``0 .. Q - 1``. It is computed with one 2-D FFT per taper.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import CtfBlock
from .dpss import TaperSet2D


@dataclass(frozen=True, eq=False)
class LsfEstimate:
    """Delay-Doppler power ``C`` of shape ``(Q, M)``; column ``k`` is Doppler bin ``k - M/2``."""

    C: np.ndarray
    region_index: int
    I: int
    J: int
    W_t: float
    W_f: float
    delay_step: float
    doppler_step: float

    @property
    def delay_axis(self) -> np.ndarray:
        return np.arange(self.C.shape[0]) * self.delay_step

    @property
    def doppler_bins(self) -> np.ndarray:
        M = self.C.shape[1]
        return np.arange(-M // 2, M // 2)

    @property
    def doppler_axis(self) -> np.ndarray:
        return self.doppler_bins * self.doppler_step

    def path_gain_db(self) -> float:
        """Total power ``sum C`` normalized by ``M Q``, in dB."""
        total = self.C.sum() / self.C.size
        return float(10 * np.log10(total)) if total > 0 else -np.inf


@dataclass(frozen=True, eq=False)
class MarginalProfile:
    """Non-negative profile sampled at ``start + k * step`` along ``axis``."""

    values: np.ndarray
    axis: str
    step: float
    start: float = 0.0

    @property
    def positions(self) -> np.ndarray:
        return self.start + np.arange(self.values.size) * self.step


def _region_rows(ctf: CtfBlock | np.ndarray, region: int, M: int) -> np.ndarray:
    g = ctf.g if isinstance(ctf, CtfBlock) else np.asarray(ctf)
    if g.ndim != 2:
        raise ValueError("CTF must be a 2-D array")
    lo = region * M
    if region < 0 or lo + M > g.shape[0]:
        raise ValueError(f"region {region} of length {M} not inside block of {g.shape[0]} snapshots")
    return g[lo : lo + M]


def lsf(ctf: CtfBlock, tapers: TaperSet2D, region: int = 0) -> LsfEstimate:
    """Multitaper local scattering function for one stationarity region."""
    M, Q = tapers.M, tapers.Q
    if ctf.g.shape[1] != Q:
        raise ValueError(f"taper frequency size {Q} does not match CTF width {ctf.g.shape[1]}")
    g = _region_rows(ctf, region, M)
    tapered = g[None, :, :] * tapers.tapers
    # forward DFT over time, inverse (unnormalized) DFT over frequency; the
    # half-length index offsets only contribute unit-modulus factors
    spectrum = np.fft.fft(tapered, axis=1)
    spectrum = np.fft.ifft(spectrum, axis=2) * Q
    C = np.mean(np.abs(spectrum) ** 2, axis=0)
    C = np.fft.fftshift(C, axes=0).T
    grid = ctf.grid
    return LsfEstimate(
        C=np.ascontiguousarray(C),
        region_index=region,
        I=tapers.I,
        J=tapers.J,
        W_t=tapers.W_t,
        W_f=tapers.W_f,
        delay_step=grid.T_s,
        doppler_step=1.0 / (M * grid.t_snap),
    )


def lsf_regions(ctf: CtfBlock, tapers: TaperSet2D) -> list[LsfEstimate]:
    """LSF of every complete region of the block."""
    n_regions = ctf.g.shape[0] // tapers.M
    return [lsf(ctf, tapers, s) for s in range(n_regions)]


def pdp_of(est: LsfEstimate) -> MarginalProfile:
    return MarginalProfile(est.C.sum(axis=1), "delay", est.delay_step, 0.0)


def dsd_of(est: LsfEstimate) -> MarginalProfile:
    M = est.C.shape[1]
    return MarginalProfile(est.C.sum(axis=0), "doppler", est.doppler_step, -(M // 2) * est.doppler_step)


def rms_spread(profile: MarginalProfile) -> float:
    """Root of the second central moment of the normalized profile."""
    p = np.asarray(profile.values, dtype=float)
    total = p.sum()
    if not total > 0:
        raise ValueError("RMS spread of an all-zero profile is undefined")
    x = profile.positions
    w = p / total
    mean = w @ x
    return float(np.sqrt(max(w @ (x - mean) ** 2, 0.0)))


def spread_cdf(series) -> list[tuple[float, float]]:
    """Empirical CDF as ``(value, P[X <= value])`` at each distinct value."""
    values = np.asarray(list(series), dtype=float)
    if values.size == 0:
        raise ValueError("empirical CDF of an empty series")
    uniq, counts = np.unique(values, return_counts=True)
    probs = np.cumsum(counts) / values.size
    probs[-1] = 1.0
    return [(float(v), float(p)) for v, p in zip(uniq, probs)]
