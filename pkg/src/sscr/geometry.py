"""Environment geometry: facades, boxes, discrete scatterers, trajectories and
blocking tests.

All lengths are in meters, times in seconds, frequencies in Hz. Vectors are
plain ``numpy`` arrays of shape ``(3,)`` in a right-handed frame with z up.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .scatter import ScatterConfig

__all__ = [
    "SPEED_OF_LIGHT",
    "Material",
    "Facade",
    "Box",
    "DiscreteScatterer",
    "Trajectory",
    "Pose",
    "SamplingGrid",
    "Scenario",
    "ScenarioError",
    "ScenarioParseError",
    "ScenarioValidationError",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "sample_trajectory",
    "segment_visible",
    "segments_visible",
]

# Parameter margin that keeps the open segment open; also the rectangle
# tolerance that makes boundary touches count as blocked.
_SEG_EPS = 1e-9
_RECT_EPS = 1e-9


class ScenarioError(Exception):
    """Base class for scenario loading problems."""


class ScenarioParseError(ScenarioError):
    """The scenario file could not be parsed."""


class ScenarioValidationError(ScenarioError, ValueError):
    """The scenario parsed but violates an invariant."""


def as_vec3(value, name: str = "vector") -> np.ndarray:
    vec = np.array(value, dtype=float).reshape(-1)
    if vec.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)):
        raise ValueError(f"{name} components must be finite")
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True)
class Material:
    name: str
    reflection_loss_db: float = 6.0
    diffuse_gain_scale: float = 1.0

    def __post_init__(self):
        if not self.reflection_loss_db >= 0:
            raise ValueError(f"material {self.name!r}: reflection_loss_db must be >= 0")
        if not self.diffuse_gain_scale > 0:
            raise ValueError(f"material {self.name!r}: diffuse_gain_scale must be > 0")


@dataclass(frozen=True, eq=False)
class Facade:
    """Planar rectangle ``corner + u*edge_u + v*edge_v`` with ``u, v`` in [0, 1]."""

    corner: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    material: Material
    name: str = ""

    def __post_init__(self):
        for attr in ("corner", "edge_u", "edge_v"):
            object.__setattr__(self, attr, as_vec3(getattr(self, attr), f"facade {self.name!r} {attr}"))
        if np.linalg.norm(np.cross(self.edge_u, self.edge_v)) <= 1e-12:
            raise ValueError(f"facade {self.name!r}: edge_u x edge_v must be non-zero (degenerate facade)")

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.edge_u, self.edge_v)
        return n / np.linalg.norm(n)

    @property
    def area(self) -> float:
        return float(np.linalg.norm(np.cross(self.edge_u, self.edge_v)))

    def point(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=float)[..., None]
        v = np.asarray(v, dtype=float)[..., None]
        return self.corner + u * self.edge_u + v * self.edge_v

    def mirror(self, point: np.ndarray) -> np.ndarray:
        """Mirror image of ``point`` across the facade plane."""
        n = self.normal
        return point - 2.0 * np.dot(point - self.corner, n) * n

    def local_coords(self, point: np.ndarray) -> tuple[float, float]:
        """Return ``(u, v)`` of the projection of ``point`` onto the facade plane."""
        gram = np.array(
            [
                [self.edge_u @ self.edge_u, self.edge_u @ self.edge_v],
                [self.edge_u @ self.edge_v, self.edge_v @ self.edge_v],
            ]
        )
        rel = np.asarray(point, dtype=float) - self.corner
        u, v = np.linalg.solve(gram, [rel @ self.edge_u, rel @ self.edge_v])
        return float(u), float(v)

    def plane_distance(self, point: np.ndarray) -> float:
        return float(np.dot(np.asarray(point) - self.corner, self.normal))


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box, expanded into six facades at load time."""

    lo: np.ndarray
    hi: np.ndarray
    material: Material
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lo", as_vec3(self.lo, f"box {self.name!r} min"))
        object.__setattr__(self, "hi", as_vec3(self.hi, f"box {self.name!r} max"))
        if not np.all(self.hi > self.lo):
            raise ValueError(f"box {self.name!r}: max must exceed min on every axis")

    def facades(self) -> list[Facade]:
        lo, hi = self.lo, self.hi
        dx, dy, dz = hi - lo
        ex, ey, ez = np.eye(3)
        faces = [
            ("x-", lo, dy * ey, dz * ez),
            ("x+", np.array([hi[0], lo[1], lo[2]]), dy * ey, dz * ez),
            ("y-", lo, dx * ex, dz * ez),
            ("y+", np.array([lo[0], hi[1], lo[2]]), dx * ex, dz * ez),
            ("z-", lo, dx * ex, dy * ey),
            ("z+", np.array([lo[0], lo[1], hi[2]]), dx * ex, dy * ey),
        ]
        return [Facade(c, u, v, self.material, f"{self.name}/{tag}") for tag, c, u, v in faces]


@dataclass(frozen=True, eq=False)
class DiscreteScatterer:
    position: np.ndarray
    velocity: np.ndarray
    gain_dbsm: float
    kind: str = "static"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position, f"scatterer {self.name!r} position"))
        object.__setattr__(self, "velocity", as_vec3(self.velocity, f"scatterer {self.name!r} velocity"))
        if self.kind not in ("static", "mobile"):
            raise ValueError(f"scatterer {self.name!r}: kind must be 'static' or 'mobile'")
        if self.kind == "static" and np.any(self.velocity != 0):
            raise ValueError(f"scatterer {self.name!r}: static scatterer must have zero velocity")
        if not np.isfinite(self.gain_dbsm):
            raise ValueError(f"scatterer {self.name!r}: gain_dbsm must be finite")

    def position_at(self, t: float) -> np.ndarray:
        return self.position + self.velocity * t


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Piecewise-linear trajectory through ``(time, position)`` waypoints."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        if times.size < 1:
            raise ValueError("trajectory needs at least one waypoint")
        if positions.shape[0] != times.size:
            raise ValueError("trajectory waypoint times and positions differ in length")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(positions))):
            raise ValueError("trajectory waypoints must be finite")
        if np.any(np.diff(times) <= 0):
            raise ValueError("waypoint times strictly increasing: violated")
        times.setflags(write=False)
        positions.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_waypoints(cls, waypoints: Iterable[tuple[float, Sequence[float]]]) -> "Trajectory":
        wps = list(waypoints)
        return cls(np.array([t for t, _ in wps], dtype=float), np.array([p for _, p in wps], dtype=float))

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])


def sample_trajectory(traj: Trajectory, t: float) -> Pose:
    """Position and velocity on ``traj`` at time ``t``.

    At a waypoint shared by two segments the velocity of the later segment is
    returned; at the final waypoint the last segment's velocity.
    """
    times = traj.times
    slack = 1e-9 * max(1.0, abs(times[0]), abs(times[-1]))
    if t < times[0] - slack or t > times[-1] + slack:
        raise ValueError(f"time {t} outside trajectory range [{times[0]}, {times[-1]}]")
    if times.size == 1:
        return Pose(traj.positions[0].copy(), np.zeros(3))
    t = min(max(t, times[0]), times[-1])
    seg = int(np.searchsorted(times, t, side="right")) - 1
    seg = min(seg, times.size - 2)
    t0, t1 = times[seg], times[seg + 1]
    p0, p1 = traj.positions[seg], traj.positions[seg + 1]
    vel = (p1 - p0) / (t1 - t0)
    return Pose(p0 + vel * (t - t0), vel)


@dataclass(frozen=True)
class SamplingGrid:
    M: int
    Q: int
    t_snap: float
    bandwidth_B: float
    carrier_fc: float

    def __post_init__(self):
        for name in ("M", "Q"):
            val = getattr(self, name)
            if int(val) != val or val < 2 or val % 2:
                raise ValueError(f"grid {name} must be an even integer >= 2")
            object.__setattr__(self, name, int(val))
        if not self.t_snap > 0:
            raise ValueError("grid t_snap must be > 0")
        if not self.bandwidth_B > 0:
            raise ValueError("grid bandwidth_B must be > 0")
        if not self.carrier_fc > self.bandwidth_B / 2:
            raise ValueError("grid carrier_fc must exceed bandwidth_B / 2")

    @property
    def T_s(self) -> float:
        """Delay-domain sample period ``1 / B``."""
        return 1.0 / self.bandwidth_B

    @property
    def subcarrier_spacing(self) -> float:
        return self.bandwidth_B / self.Q

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_fc

    @property
    def max_delay(self) -> float:
        """Unambiguous delay window ``Q * T_s``."""
        return self.Q * self.T_s

    def freq_indices(self) -> np.ndarray:
        return np.arange(-self.Q // 2, self.Q // 2)


class FacadeArrays:
    """Stacked facade data for vectorized intersection tests."""

    def __init__(self, facades: Sequence[Facade]):
        self.count = len(facades)
        if self.count == 0:
            return
        self.corner = np.array([f.corner for f in facades])
        self.edge_u = np.array([f.edge_u for f in facades])
        self.edge_v = np.array([f.edge_v for f in facades])
        self.normal = np.cross(self.edge_u, self.edge_v)
        uu = np.einsum("fi,fi->f", self.edge_u, self.edge_u)
        uv = np.einsum("fi,fi->f", self.edge_u, self.edge_v)
        vv = np.einsum("fi,fi->f", self.edge_v, self.edge_v)
        det = uu * vv - uv * uv
        # inverse Gram matrix per facade, used to recover (u, v) from dot products
        self.ginv = np.stack([np.stack([vv, -uv], -1), np.stack([-uv, uu], -1)], -2) / det[:, None, None]
        self.normal_norm = np.linalg.norm(self.normal, axis=1)


@dataclass(frozen=True, eq=False)
class Scenario:
    facades: tuple[Facade, ...]
    boxes: tuple[Box, ...]
    discrete_scatterers: tuple[DiscreteScatterer, ...]
    tx_trajectory: Trajectory
    rx_trajectory: Trajectory
    grid: SamplingGrid
    scatter_config: ScatterConfig = field(default_factory=ScatterConfig)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "facades", tuple(self.facades))
        object.__setattr__(self, "boxes", tuple(self.boxes))
        object.__setattr__(self, "discrete_scatterers", tuple(self.discrete_scatterers))
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an integer in [0, 2**64)")
        object.__setattr__(self, "seed", int(self.seed))

    @classmethod
    def build(
        cls,
        facades: Sequence[Facade] = (),
        boxes: Sequence[Box] = (),
        **kwargs,
    ) -> "Scenario":
        """Construct a scenario, expanding ``boxes`` into facades."""
        all_facades = list(facades)
        for box in boxes:
            all_facades.extend(box.facades())
        return cls(facades=tuple(all_facades), boxes=tuple(boxes), **kwargs)

    @cached_property
    def facade_arrays(self) -> FacadeArrays:
        return FacadeArrays(self.facades)

    @property
    def explicit_facades(self) -> tuple[Facade, ...]:
        return self.facades[: len(self.facades) - 6 * len(self.boxes)]

    def with_seed(self, seed: int) -> "Scenario":
        return Scenario(
            self.facades,
            self.boxes,
            self.discrete_scatterers,
            self.tx_trajectory,
            self.rx_trajectory,
            self.grid,
            self.scatter_config,
            seed,
        )


def segments_visible(
    a: np.ndarray,
    b: np.ndarray,
    scenario: Scenario,
    ignore: np.ndarray | None = None,
) -> np.ndarray:
    """Vectorized :func:`segment_visible` for ``N`` segments.

    Parameters
    ----------
    a, b : ndarray, shape (N, 3)
        Segment endpoints.
    ignore : ndarray of bool, shape (N, F), optional
        Facades to skip for each segment.

    Returns
    -------
    ndarray of bool, shape (N,)
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    n_seg = a.shape[0]
    fa = scenario.facade_arrays
    if fa.count == 0 or n_seg == 0:
        return np.ones(n_seg, dtype=bool)

    # Canonical endpoint order keeps the test exactly symmetric in (a, b).
    swap = _lex_greater(a, b)
    a, b = np.where(swap[:, None], b, a), np.where(swap[:, None], a, b)

    d = b - a
    rel_a = fa.corner[None, :, :] - a[:, None, :]
    num = np.einsum("nfi,fi->nf", rel_a, fa.normal)
    den = d @ fa.normal.T
    seg_len = np.linalg.norm(d, axis=1)
    parallel = np.abs(den) <= 1e-12 * seg_len[:, None] * fa.normal_norm[None, :]

    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(parallel, np.nan, num / den)
    hit = a[:, None, :] + t[..., None] * d[:, None, :]
    uv = _local_uv(hit - fa.corner[None], fa)
    inside = np.all((uv >= -_RECT_EPS) & (uv <= 1 + _RECT_EPS), axis=-1)
    blocked = (t > _SEG_EPS) & (t < 1 - _SEG_EPS) & inside

    # Segments lying in a facade plane: blocked if they overlap the rectangle.
    plane_dist = np.abs(num) / fa.normal_norm[None, :]
    coplanar = parallel & (plane_dist <= 1e-9)
    for i, f in zip(*np.nonzero(coplanar)):
        blocked[i, f] = _coplanar_overlap(a[i], b[i], fa, f)

    if ignore is not None:
        blocked &= ~np.asarray(ignore, dtype=bool).reshape(n_seg, fa.count)
    return ~np.any(blocked, axis=1)


def segment_visible(a, b, scenario: Scenario, ignore: Iterable[int] | None = None) -> bool:
    """True iff the open segment ``(a, b)`` crosses no facade outside ``ignore``.

    Touching a facade boundary counts as blocked.
    """
    mask = None
    if ignore:
        mask = np.zeros((1, scenario.facade_arrays.count), dtype=bool)
        mask[0, list(ignore)] = True
    return bool(segments_visible(as_vec3(a)[None], as_vec3(b)[None], scenario, mask)[0])


def _lex_greater(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros(a.shape[0], dtype=bool)
    undecided = np.ones(a.shape[0], dtype=bool)
    for k in range(3):
        out |= undecided & (a[:, k] > b[:, k])
        undecided &= a[:, k] == b[:, k]
    return out


def _local_uv(rel: np.ndarray, fa: FacadeArrays) -> np.ndarray:
    dots = np.stack(
        [np.einsum("...fi,fi->...f", rel, fa.edge_u), np.einsum("...fi,fi->...f", rel, fa.edge_v)],
        axis=-1,
    )
    return np.einsum("fij,...fj->...fi", fa.ginv, dots)


def _coplanar_overlap(a: np.ndarray, b: np.ndarray, fa: FacadeArrays, f: int) -> bool:
    ua, va = fa.ginv[f] @ [(a - fa.corner[f]) @ fa.edge_u[f], (a - fa.corner[f]) @ fa.edge_v[f]]
    ub, vb = fa.ginv[f] @ [(b - fa.corner[f]) @ fa.edge_u[f], (b - fa.corner[f]) @ fa.edge_v[f]]
    lo, hi = _SEG_EPS, 1 - _SEG_EPS
    for p0, dp in ((ua, ub - ua), (va, vb - va)):
        if abs(dp) < 1e-15:
            if p0 < -_RECT_EPS or p0 > 1 + _RECT_EPS:
                return False
            continue
        t0, t1 = (-_RECT_EPS - p0) / dp, (1 + _RECT_EPS - p0) / dp
        lo, hi = max(lo, min(t0, t1)), min(hi, max(t0, t1))
    return lo <= hi


# --------------------------------------------------------------------------
# Scenario files
# --------------------------------------------------------------------------


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a JSON scenario file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ScenarioParseError(f"{path}: malformed scenario file: {exc}") from exc
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> Scenario:
    from pydantic import ValidationError

    from .schema import ScenarioFile

    try:
        doc = ScenarioFile.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(x) for x in err["loc"])
        raise ScenarioValidationError(f"{loc}: {err['msg']}") from exc
    try:
        return doc.to_scenario()
    except ValueError as exc:
        raise ScenarioValidationError(str(exc)) from exc


def _material_dict(m: Material) -> dict:
    return {
        "name": m.name,
        "reflection_loss_db": float(m.reflection_loss_db),
        "diffuse_gain_scale": float(m.diffuse_gain_scale),
    }


def _traj_dict(traj: Trajectory) -> dict:
    return {
        "waypoints": [
            {"t": float(t), "position": [float(x) for x in p]} for t, p in zip(traj.times, traj.positions)
        ]
    }


def scenario_to_dict(scenario: Scenario) -> dict:
    """Canonical dictionary form, round-trippable through :func:`scenario_from_dict`."""
    g = scenario.grid
    sc = scenario.scatter_config
    return {
        "grid": {
            "M": g.M,
            "Q": g.Q,
            "t_snap": float(g.t_snap),
            "bandwidth_B": float(g.bandwidth_B),
            "carrier_fc": float(g.carrier_fc),
        },
        "facades": [
            {
                "name": f.name,
                "corner": f.corner.tolist(),
                "edge_u": f.edge_u.tolist(),
                "edge_v": f.edge_v.tolist(),
                "material": _material_dict(f.material),
            }
            for f in scenario.explicit_facades
        ],
        "boxes": [
            {"name": b.name, "min": b.lo.tolist(), "max": b.hi.tolist(), "material": _material_dict(b.material)}
            for b in scenario.boxes
        ],
        "scatterers": [
            {
                "name": s.name,
                "position": s.position.tolist(),
                "velocity": s.velocity.tolist(),
                "gain_dbsm": float(s.gain_dbsm),
                "kind": s.kind,
            }
            for s in scenario.discrete_scatterers
        ],
        "tx_trajectory": _traj_dict(scenario.tx_trajectory),
        "rx_trajectory": _traj_dict(scenario.rx_trajectory),
        "scatter_config": {
            "density_per_m2": float(sc.density_per_m2),
            "gain_mean_db": float(sc.gain_mean_db),
            "gain_std_db": float(sc.gain_std_db),
            "rng_stream_label": sc.rng_stream_label,
        },
        "seed": scenario.seed,
    }


def canonical_json(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), sort_keys=True, indent=2) + "\n"
