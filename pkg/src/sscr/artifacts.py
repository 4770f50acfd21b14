"""Reading and writing pipeline artifacts.

Every CSV carries a single header line whose column names include units.
Floats are written with ``repr`` precision so files are byte-reproducible.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import LsfEstimate, dsd_of, pdp_of
from .channel import CtfBlock
from .geometry import SamplingGrid
from .mpc import MpcSet

DB_FLOOR = -300.0

MPC_COLUMNS = (
    "m", "kind", "order", "delay_s", "amp_re", "amp_im", "doppler_hz",
    "dep_x", "dep_y", "dep_z", "arr_x", "arr_y", "arr_z",
)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer, str)):
        return str(x)
    return repr(float(x))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:] if ln]


def write_mpcs_csv(path: Path, mpc_sets: Sequence[MpcSet]) -> Path:
    rows = []
    for s in mpc_sets:
        for p in s:
            rows.append(
                (s.m, p.kind, p.order, p.delay_s, p.amplitude.real, p.amplitude.imag, p.doppler_hz,
                 *p.departure_dir, *p.arrival_dir)
            )
    return write_csv(path, MPC_COLUMNS, rows)


def grid_dict(grid: SamplingGrid) -> dict:
    return {
        "M": grid.M,
        "Q": grid.Q,
        "t_snap": float(grid.t_snap),
        "bandwidth_B": float(grid.bandwidth_B),
        "carrier_fc": float(grid.carrier_fc),
    }


def write_ctf(path: Path, block: CtfBlock, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``block`` as little-endian complex64, row-major, plus a JSON sidecar."""
    path = Path(path)
    path.write_bytes(block.g.astype("<c8").tobytes(order="C"))
    meta = {
        "format": "complex64-le-row-major",
        "shape": [block.grid.M, block.grid.Q],
        "grid": grid_dict(block.grid),
    }
    if extra:
        meta.update(extra)
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return path, side


def read_ctf(path: Path) -> tuple[CtfBlock, dict]:
    """Load a CTF block and its sidecar metadata."""
    path = Path(path)
    side = path.with_suffix(".json")
    try:
        meta = json.loads(side.read_text())
        grid = SamplingGrid(**meta["grid"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ValueError(f"{side}: unreadable CTF sidecar: {exc}") from exc
    data = np.frombuffer(path.read_bytes(), dtype="<c8")
    if data.size != grid.M * grid.Q:
        raise ValueError(f"{path}: expected {grid.M * grid.Q} complex samples, found {data.size}")
    g = data.reshape(grid.M, grid.Q).astype(complex)
    return CtfBlock(g, grid), meta


def write_ctf_magnitude_csv(path: Path, block: CtfBlock) -> Path:
    q0 = -block.grid.Q // 2
    df = block.grid.subcarrier_spacing
    rows = (
        (m, k + q0, (k + q0) * df, abs(block.g[m, k]))
        for m in range(block.grid.M)
        for k in range(block.grid.Q)
    )
    return write_csv(path, ("m", "q", "freq_offset_hz", "abs_g"), rows)


def _db_rel(values: np.ndarray, ref: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(values / ref) if ref > 0 else np.full(values.shape, -np.inf)
    return np.maximum(out, DB_FLOOR)


def write_lsf_csv(path: Path, estimates: Sequence[LsfEstimate]) -> Path:
    ref = max((float(e.C.max()) for e in estimates), default=0.0)
    rows = []
    for e in estimates:
        db = _db_rel(e.C, ref)
        delays, dopplers, bins = e.delay_axis, e.doppler_axis, e.doppler_bins
        for n in range(e.C.shape[0]):
            for k in range(e.C.shape[1]):
                rows.append((e.region_index, n, bins[k], delays[n], dopplers[k], db[n, k]))
    return write_csv(path, ("s", "n", "r", "delay_s", "doppler_hz", "value_db"), rows)


def write_pdp_csv(path: Path, estimates: Sequence[LsfEstimate]) -> Path:
    profiles = [pdp_of(e) for e in estimates]
    ref = max((float(p.values.max()) for p in profiles), default=0.0)
    rows = []
    for e, p in zip(estimates, profiles):
        db = _db_rel(p.values, ref)
        for n, (x, v) in enumerate(zip(p.positions, db)):
            rows.append((e.region_index, n, x, v))
    return write_csv(path, ("s", "n", "delay_s", "value_db"), rows)


def write_dsd_csv(path: Path, estimates: Sequence[LsfEstimate]) -> Path:
    profiles = [dsd_of(e) for e in estimates]
    ref = max((float(p.values.max()) for p in profiles), default=0.0)
    rows = []
    for e, p in zip(estimates, profiles):
        db = _db_rel(p.values, ref)
        for r, x, v in zip(e.doppler_bins, p.positions, db):
            rows.append((e.region_index, r, x, v))
    return write_csv(path, ("s", "r", "doppler_hz", "value_db"), rows)


def write_cdf_csv(path: Path, cdfs: dict[str, list[tuple[float, float]]]) -> Path:
    rows = [(name, v, p) for name, cdf in cdfs.items() for v, p in cdf]
    return write_csv(path, ("quantity", "value", "probability"), rows)


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
