"""Multipath component enumeration.

Paths are line-of-sight, image-method specular reflections (order <= 3) and
single-bounce paths via diffuse point scatterers or discrete scatterers.
Phases follow ``exp(-j 2 pi f_c tau)`` at the carrier; the per-subcarrier
term is applied when the transfer function is synthesized.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .geometry import (
    SPEED_OF_LIGHT,
    DiscreteScatterer,
    Pose,
    SamplingGrid,
    Scenario,
    sample_trajectory,
    segments_visible,
)
from .scatter import PointScatterer, place_scatterers, scatterer_arrays

MAX_REFLECTION_ORDER = 3
KIND_RANK = {"los": 0, "specular": 1, "diffuse": 2, "discrete": 3}

# interior margin for reflection points, in normalized facade coordinates
_INTERIOR_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class Mpc:
    """One propagation path.

    ``departure_dir`` is the unit vector leaving the TX, ``arrival_dir`` the
    unit vector from the RX back along the incoming path.
    """

    amplitude: complex
    delay_s: float
    departure_dir: np.ndarray
    arrival_dir: np.ndarray
    doppler_hz: float
    kind: str
    order: int = 0
    chain: tuple[int, ...] = ()
    scatterer_id: int | None = None

    @property
    def key(self) -> tuple:
        """Identity of the path across snapshots."""
        return (self.kind, self.chain, -1 if self.scatterer_id is None else self.scatterer_id)

    def sort_key(self) -> tuple:
        return (self.delay_s, KIND_RANK[self.kind], self.order, self.chain,
                -1 if self.scatterer_id is None else self.scatterer_id)


@dataclass(frozen=True)
class MpcSet:
    mpcs: tuple[Mpc, ...]
    m: int

    @property
    def P_m(self) -> int:
        return len(self.mpcs)

    def __len__(self) -> int:
        return len(self.mpcs)

    def __iter__(self):
        return iter(self.mpcs)


def _carrier_phase(fc: float, length):
    return np.exp(-2j * np.pi * fc * np.asarray(length) / SPEED_OF_LIGHT)


def doppler_of(
    departure_dir: np.ndarray,
    arrival_dir: np.ndarray,
    tx: Pose,
    rx: Pose,
    carrier_fc: float,
    scatterer_velocity: np.ndarray | None = None,
) -> float:
    """Doppler shift ``-f_c d(tau)/dt`` of a path from its end directions.

    For a single-bounce scatterer path the scatterer's own motion adds the
    bistatic term ``v_s . (e_s->tx + e_s->rx)``, where ``e_s->tx = -departure_dir``
    and ``e_s->rx = -arrival_dir``.
    """
    rate = np.dot(tx.velocity, departure_dir) + np.dot(rx.velocity, arrival_dir)
    if scatterer_velocity is not None:
        rate -= np.dot(scatterer_velocity, np.asarray(departure_dir) + np.asarray(arrival_dir))
    return float(carrier_fc / SPEED_OF_LIGHT * rate)


def los_mpc(tx: Pose, rx: Pose, scenario: Scenario, grid: SamplingGrid | None = None) -> Mpc | None:
    grid = grid or scenario.grid
    diff = rx.position - tx.position
    d = float(np.linalg.norm(diff))
    if d == 0:
        raise ValueError("TX and RX positions coincide")
    if not segments_visible(tx.position[None], rx.position[None], scenario)[0]:
        return None
    dep = diff / d
    arr = -dep
    amp = grid.wavelength / (4 * np.pi * d) * _carrier_phase(grid.carrier_fc, d)
    return Mpc(
        amplitude=complex(amp),
        delay_s=d / SPEED_OF_LIGHT,
        departure_dir=dep,
        arrival_dir=arr,
        doppler_hz=doppler_of(dep, arr, tx, rx, grid.carrier_fc),
        kind="los",
    )


def facade_chains(n_facades: int, max_order: int):
    """Ordered facade chains of length 1..max_order without immediate repeats."""
    for k in range(1, max_order + 1):
        for chain in itertools.product(range(n_facades), repeat=k):
            if all(chain[i] != chain[i + 1] for i in range(k - 1)):
                yield chain


def reflection_points(tx: np.ndarray, rx: np.ndarray, chain: Sequence[int], scenario: Scenario):
    """Reflection points of the specular path along ``chain``, or ``None``.

    The TX is mirrored successively across the chain planes; the path is then
    unfolded backwards from the RX. Every reflection point must fall strictly
    inside its facade rectangle with both neighbours on the same side of the
    plane.
    """
    facades = [scenario.facades[i] for i in chain]
    images = [tx]
    for f in facades:
        images.append(f.mirror(images[-1]))
    points: list[np.ndarray] = [None] * len(chain)  # type: ignore[list-item]
    target = rx
    for j in range(len(chain) - 1, -1, -1):
        f = facades[j]
        src = images[j + 1]
        n = f.normal
        den = np.dot(target - src, n)
        if abs(den) < 1e-14:
            return None
        t = np.dot(f.corner - src, n) / den
        if not _open_unit(t):
            return None
        p = src + t * (target - src)
        u, v = f.local_coords(p)
        if not (_INTERIOR_EPS < u < 1 - _INTERIOR_EPS and _INTERIOR_EPS < v < 1 - _INTERIOR_EPS):
            return None
        points[j] = p
        target = p
    path = [tx, *points, rx]
    for j, f in enumerate(facades):
        before = f.plane_distance(path[j])
        after = f.plane_distance(path[j + 2])
        if before * after <= 0 or abs(before) < 1e-12 or abs(after) < 1e-12:
            return None
    return points


def _open_unit(t: float) -> bool:
    return 1e-12 < t < 1 - 1e-12


def specular_mpcs(
    tx: Pose, rx: Pose, scenario: Scenario, grid: SamplingGrid | None = None, max_order: int = 1
) -> list[Mpc]:
    """Image-method specular reflections of order 1..``max_order``."""
    if not 0 <= max_order <= MAX_REFLECTION_ORDER:
        raise ValueError(f"max_order must be in [0, {MAX_REFLECTION_ORDER}], got {max_order}")
    grid = grid or scenario.grid
    n_fac = len(scenario.facades)
    out: list[Mpc] = []
    if max_order == 0 or n_fac == 0:
        return out
    for chain in facade_chains(n_fac, max_order):
        points = reflection_points(tx.position, rx.position, chain, scenario)
        if points is None:
            continue
        path = np.array([tx.position, *points, rx.position])
        seg = np.diff(path, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        if np.any(seg_len < 1e-9):
            continue
        ignore = np.zeros((len(seg), n_fac), dtype=bool)
        for j, fi in enumerate(chain):
            ignore[j, fi] = True
            ignore[j + 1, fi] = True
        if not np.all(segments_visible(path[:-1], path[1:], scenario, ignore)):
            continue
        length = float(seg_len.sum())
        loss = np.prod([10.0 ** (-scenario.facades[i].material.reflection_loss_db / 20.0) for i in chain])
        amp = grid.wavelength / (4 * np.pi * length) * loss * _carrier_phase(grid.carrier_fc, length)
        dep = seg[0] / seg_len[0]
        arr = -seg[-1] / seg_len[-1]
        out.append(
            Mpc(
                amplitude=complex(amp),
                delay_s=length / SPEED_OF_LIGHT,
                departure_dir=dep,
                arrival_dir=arr,
                doppler_hz=doppler_of(dep, arr, tx, rx, grid.carrier_fc),
                kind="specular",
                order=len(chain),
                chain=tuple(chain),
            )
        )
    return out


def diffuse_mpcs(
    tx: Pose,
    rx: Pose,
    scatterers: Sequence[PointScatterer],
    discrete_scatterers: Sequence[DiscreteScatterer],
    scenario: Scenario,
    grid: SamplingGrid | None = None,
    t: float = 0.0,
) -> list[Mpc]:
    """Single-bounce paths via point scatterers and discrete scatterers.

    A point scatterer's host facade is excluded from its own blocking test.
    Discrete scatterers move linearly, ``position + velocity * t``.
    """
    grid = grid or scenario.grid
    lam, fc = grid.wavelength, grid.carrier_fc
    n_fac = len(scenario.facades)
    out: list[Mpc] = []

    pos, gains, hosts = scatterer_arrays(list(scatterers))
    ids = [s.id for s in scatterers]
    n_pt = pos.shape[0]
    disc_pos = np.array([s.position_at(t) for s in discrete_scatterers]).reshape(-1, 3)
    all_pos = np.vstack([pos, disc_pos])
    if all_pos.shape[0] == 0:
        return out

    ignore = np.zeros((all_pos.shape[0], n_fac), dtype=bool)
    if n_fac and n_pt:
        ignore[np.arange(n_pt), hosts] = True
    to_s = all_pos - tx.position
    from_s = rx.position - all_pos
    d1 = np.linalg.norm(to_s, axis=1)
    d2 = np.linalg.norm(from_s, axis=1)
    usable = (d1 > 1e-9) & (d2 > 1e-9)
    vis = usable.copy()
    if np.any(usable):
        idx = np.nonzero(usable)[0]
        vis_tx = segments_visible(np.broadcast_to(tx.position, (idx.size, 3)), all_pos[idx], scenario, ignore[idx])
        vis_rx = segments_visible(all_pos[idx], np.broadcast_to(rx.position, (idx.size, 3)), scenario, ignore[idx])
        vis[idx] = vis_tx & vis_rx

    for k in np.nonzero(vis)[0]:
        dep = to_s[k] / d1[k]
        arr = -from_s[k] / d2[k]
        length = d1[k] + d2[k]
        if k < n_pt:
            mag_phase = lam / (4 * np.pi) * gains[k] / (d1[k] * d2[k])
            v_s = None
            kind, sid = "diffuse", ids[k]
        else:
            ds = discrete_scatterers[k - n_pt]
            sigma = 10.0 ** (ds.gain_dbsm / 10.0)
            mag_phase = np.sqrt(sigma * lam**2 / (4 * np.pi) ** 3) / (d1[k] * d2[k])
            v_s = ds.velocity
            kind, sid = "discrete", k - n_pt
        amp = mag_phase * _carrier_phase(fc, length)
        out.append(
            Mpc(
                amplitude=complex(amp),
                delay_s=float(length / SPEED_OF_LIGHT),
                departure_dir=dep,
                arrival_dir=arr,
                doppler_hz=doppler_of(dep, arr, tx, rx, fc, v_s),
                kind=kind,
                order=1,
                scatterer_id=int(sid),
            )
        )
    return out


def prune(mpcs: Sequence[Mpc], prune_floor_db: float) -> list[Mpc]:
    """Keep paths no more than ``prune_floor_db`` below the strongest one."""
    if not mpcs:
        return []
    mags = np.array([abs(p.amplitude) for p in mpcs])
    keep = mags >= mags.max() * 10.0 ** (-prune_floor_db / 20.0)
    return [p for p, k in zip(mpcs, keep) if k]


def canonical(mpcs: Sequence[Mpc]) -> tuple[Mpc, ...]:
    return tuple(sorted(mpcs, key=Mpc.sort_key))


def poses_at(scenario: Scenario, t: float) -> tuple[Pose, Pose]:
    return sample_trajectory(scenario.tx_trajectory, t), sample_trajectory(scenario.rx_trajectory, t)


def mpcs_at_time(
    scenario: Scenario,
    t: float,
    max_order: int,
    prune_floor_db: float,
    scatterers: Sequence[PointScatterer] | None = None,
) -> tuple[Mpc, ...]:
    """All pruned, canonically ordered paths for the geometry at time ``t``."""
    if scatterers is None:
        scatterers = place_scatterers(scenario)
    tx, rx = poses_at(scenario, t)
    paths: list[Mpc] = []
    los = los_mpc(tx, rx, scenario)
    if los is not None:
        paths.append(los)
    paths += specular_mpcs(tx, rx, scenario, max_order=max_order)
    paths += diffuse_mpcs(tx, rx, scatterers, scenario.discrete_scatterers, scenario, t=t)
    return canonical(prune(paths, prune_floor_db))


def evolve(mpcs: Sequence[Mpc], dt: float, carrier_fc: float) -> tuple[Mpc, ...]:
    """Advance paths by ``dt`` seconds at constant Doppler and magnitude.

    ``tau(t + dt) = tau - nu dt / f_c`` and the carrier phase rotates by
    ``exp(j 2 pi nu dt)``.
    """
    if dt == 0:
        return tuple(mpcs)
    out = [
        replace(
            p,
            delay_s=p.delay_s - p.doppler_hz * dt / carrier_fc,
            amplitude=p.amplitude * np.exp(2j * np.pi * p.doppler_hz * dt),
        )
        for p in mpcs
    ]
    return canonical(out)


def region_center(m: int, region_length: int) -> int:
    return (m // region_length) * region_length + region_length // 2


def check_region_length(region_length: int | None, M: int) -> int:
    if region_length is None or int(region_length) != region_length or region_length < 1 or M % region_length:
        raise ValueError(f"region length {region_length} must be a positive divisor of M={M}")
    return int(region_length)


def enumerate_mpcs(
    scenario: Scenario,
    m: int,
    mode: str = "per_snapshot",
    region_length: int | None = None,
    max_order: int = 2,
    prune_floor_db: float = 40.0,
    scatterers: Sequence[PointScatterer] | None = None,
    block_start: float = 0.0,
) -> MpcSet:
    """Paths for snapshot ``m`` of the block starting at ``block_start`` seconds.

    ``per_snapshot`` evaluates the geometry at every snapshot. ``per_region``
    evaluates it once at the centre snapshot of the stationarity region that
    contains ``m`` and extrapolates delays and phases with the path Doppler.
    """
    grid = scenario.grid
    if not 0 <= m < grid.M:
        raise ValueError(f"snapshot index {m} outside block of {grid.M}")
    if mode == "per_snapshot":
        return MpcSet(mpcs_at_time(scenario, block_start + m * grid.t_snap, max_order, prune_floor_db, scatterers), m)
    if mode == "per_region":
        rl = check_region_length(region_length, grid.M)
        mc = region_center(m, rl)
        center = mpcs_at_time(scenario, block_start + mc * grid.t_snap, max_order, prune_floor_db, scatterers)
        return MpcSet(evolve(center, (m - mc) * grid.t_snap, grid.carrier_fc), m)
    raise ValueError(f"unknown mode {mode!r}")


def block_mpc_sets(
    scenario: Scenario,
    block_start: float = 0.0,
    mode: str = "per_snapshot",
    region_length: int | None = None,
    max_order: int = 2,
    prune_floor_db: float = 40.0,
    scatterers: Sequence[PointScatterer] | None = None,
) -> list[MpcSet]:
    """:func:`enumerate_mpcs` for every snapshot of one block, sharing work per region."""
    grid = scenario.grid
    if scatterers is None:
        scatterers = place_scatterers(scenario)
    if mode == "per_snapshot":
        return [
            MpcSet(mpcs_at_time(scenario, block_start + m * grid.t_snap, max_order, prune_floor_db, scatterers), m)
            for m in range(grid.M)
        ]
    if mode != "per_region":
        raise ValueError(f"unknown mode {mode!r}")
    rl = check_region_length(region_length, grid.M)
    sets = []
    for start in range(0, grid.M, rl):
        mc = start + rl // 2
        center = mpcs_at_time(scenario, block_start + mc * grid.t_snap, max_order, prune_floor_db, scatterers)
        for m in range(start, start + rl):
            sets.append(MpcSet(evolve(center, (m - mc) * grid.t_snap, grid.carrier_fc), m))
    return sets
