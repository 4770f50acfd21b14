"""Discrete prolate spheroidal sequences and separable 2-D taper sets.

Sequences are eigenvectors of Slepian's symmetric tridiagonal matrix, which
commutes with the sinc kernel; their concentrations are evaluated afterwards
from the sequence autocorrelation.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal


@dataclass(frozen=True, eq=False)
class DpssSet:
    """``sequences`` is ``(K, N)`` with orthonormal rows, ordered by concentration."""

    sequences: np.ndarray
    concentrations: np.ndarray
    half_bandwidth_W: float

    @property
    def N(self) -> int:
        return self.sequences.shape[1]

    @property
    def K(self) -> int:
        return self.sequences.shape[0]


@dataclass(frozen=True, eq=False)
class TaperSet2D:
    """Tapers ``G[w] = outer(u_i, v_j)`` with ``w = i * J + j``, shape ``(IJ, M, Q)``."""

    tapers: np.ndarray
    I: int
    J: int
    W_t: float
    W_f: float

    @property
    def M(self) -> int:
        return self.tapers.shape[1]

    @property
    def Q(self) -> int:
        return self.tapers.shape[2]

    def __len__(self) -> int:
        return self.tapers.shape[0]


def concentration(seq: np.ndarray, W: float) -> np.ndarray:
    """Fraction of each sequence's energy inside ``[-W, W]``.

    Evaluates ``x^T A x`` with ``A[i, j] = sin(2 pi W (i - j)) / (pi (i - j))``
    through the autocorrelation of ``x``, in ``O(N log N)``.
    """
    seq = np.atleast_2d(seq)
    n = seq.shape[1]
    nfft = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(seq, nfft, axis=1)
    acf = np.fft.irfft(np.abs(spectrum) ** 2, nfft, axis=1)[:, :n]
    k = np.arange(1, n)
    kernel = np.sin(2 * np.pi * W * k) / (np.pi * k)
    return 2 * W * acf[:, 0] + 2 * acf[:, 1:] @ kernel


def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    for row in vectors:
        mean = row.mean()
        if abs(mean) >= 1e-12:
            if mean < 0:
                row *= -1
            continue
        nz = np.nonzero(np.abs(row) > 1e-12 * np.abs(row).max())[0]
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return vectors


_lock = threading.Lock()


@lru_cache(maxsize=64)
def _dpss_cached(N: int, W: float, K: int) -> DpssSet:
    i = np.arange(N, dtype=float)
    diag = ((N - 1 - 2 * i) / 2.0) ** 2 * math.cos(2 * math.pi * W)
    off = i[1:] * (N - i[1:]) / 2.0
    _, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(N - K, N - 1))
    seqs = np.ascontiguousarray(vecs[:, ::-1].T)
    seqs /= np.linalg.norm(seqs, axis=1, keepdims=True)
    _sign_fix(seqs)
    conc = concentration(seqs, W)
    seqs.setflags(write=False)
    conc.setflags(write=False)
    return DpssSet(seqs, conc, W)


def dpss(N: int, W: float, K: int) -> DpssSet:
    """First ``K`` discrete prolate spheroidal sequences of length ``N``.

    Parameters
    ----------
    N : int
        Sequence length, ``N >= 2``.
    W : float
        Half-bandwidth in cycles per sample, ``0 < W < 0.5``.
    K : int
        Number of sequences, ``1 <= K <= N``.

    Returns
    -------
    DpssSet
        Read-only; results are cached per ``(N, W, K)``.
    """
    if int(N) != N or N < 2:
        raise ValueError(f"N must be an integer >= 2, got {N}")
    if not 0 < W < 0.5:
        raise ValueError(f"half-bandwidth W must satisfy 0 < W < 0.5, got {W}")
    if int(K) != K or not 1 <= K <= N:
        raise ValueError(f"K must be an integer in [1, N={N}], got {K}")
    with _lock:
        return _dpss_cached(int(N), float(W), int(K))


def max_tapers(n: int, W: float) -> int:
    """Concentration guard ``2 floor(n W)`` (with a small tolerance for ``n W``)."""
    return 2 * math.floor(n * W + 1e-9)


def tapers_2d(M: int, Q: int, I: int, J: int, W_t: float, W_f: float) -> TaperSet2D:
    """Separable time-frequency tapers with unit Frobenius norm."""
    i_max, j_max = max_tapers(M, W_t), max_tapers(Q, W_f)
    if not (1 <= I <= i_max and 1 <= J <= j_max):
        raise ValueError(
            f"taper counts I={I}, J={J} exceed the concentration guard; "
            f"use I <= {i_max} and J <= {j_max} for W_t={W_t}, W_f={W_f}"
        )
    u = dpss(M, W_t, I).sequences
    v = dpss(Q, W_f, J).sequences
    tapers = np.einsum("im,jq->ijmq", u, v).reshape(I * J, M, Q)
    tapers.setflags(write=False)
    return TaperSet2D(tapers, I, J, W_t, W_f)


def default_tapers(M: int, Q: int, I: int = 3, J: int = 3, W_t: float | None = None, W_f: float | None = None):
    """Tapers with the default bandwidths ``W_t = (I+1)/(2M)``, ``W_f = (J+1)/(2Q)``."""
    W_t = (I + 1) / (2 * M) if W_t is None else W_t
    W_f = (J + 1) / (2 * Q) if W_f is None else W_f
    return tapers_2d(M, Q, I, J, W_t, W_f)
