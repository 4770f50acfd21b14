"""Pydantic models for the JSON scenario and run-config files.

Both reject unknown keys. Invariants that involve more than one field are
checked by the domain types they convert into.
"""
from __future__ import annotations

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, FiniteFloat

Vec = Annotated[list[FiniteFloat], Field(min_length=3, max_length=3)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridModel(_Strict):
    M: int
    Q: int
    t_snap: FiniteFloat
    bandwidth_B: FiniteFloat
    carrier_fc: FiniteFloat


class MaterialModel(_Strict):
    name: str
    reflection_loss_db: FiniteFloat = 6.0
    diffuse_gain_scale: FiniteFloat = 1.0

    def to_material(self):
        from .geometry import Material

        return Material(self.name, self.reflection_loss_db, self.diffuse_gain_scale)


class FacadeModel(_Strict):
    name: str = ""
    corner: Vec
    edge_u: Vec
    edge_v: Vec
    material: MaterialModel


class BoxModel(_Strict):
    name: str = ""
    min: Vec
    max: Vec
    material: MaterialModel


class ScattererModel(_Strict):
    name: str = ""
    position: Vec
    velocity: Vec = [0.0, 0.0, 0.0]
    gain_dbsm: FiniteFloat
    kind: Literal["static", "mobile"] = "static"


class WaypointModel(_Strict):
    t: FiniteFloat
    position: Vec


class TrajectoryModel(_Strict):
    waypoints: list[WaypointModel] = Field(min_length=1)

    def to_trajectory(self):
        from .geometry import Trajectory

        return Trajectory.from_waypoints((w.t, w.position) for w in self.waypoints)


class ScatterConfigModel(_Strict):
    density_per_m2: FiniteFloat = 0.0
    gain_mean_db: FiniteFloat = 0.0
    gain_std_db: FiniteFloat = 0.0
    rng_stream_label: str = "diffuse"


class ScenarioFile(_Strict):
    grid: GridModel
    facades: list[FacadeModel] = []
    boxes: list[BoxModel] = []
    scatterers: list[ScattererModel] = []
    tx_trajectory: TrajectoryModel
    rx_trajectory: TrajectoryModel
    scatter_config: ScatterConfigModel = ScatterConfigModel()
    seed: int = Field(ge=0, lt=2**64)

    def to_scenario(self):
        from .geometry import Box, DiscreteScatterer, Facade, SamplingGrid, Scenario
        from .scatter import ScatterConfig

        return Scenario.build(
            facades=[
                Facade(f.corner, f.edge_u, f.edge_v, f.material.to_material(), f.name) for f in self.facades
            ],
            boxes=[Box(b.min, b.max, b.material.to_material(), b.name) for b in self.boxes],
            discrete_scatterers=[
                DiscreteScatterer(s.position, s.velocity, s.gain_dbsm, s.kind, s.name) for s in self.scatterers
            ],
            tx_trajectory=self.tx_trajectory.to_trajectory(),
            rx_trajectory=self.rx_trajectory.to_trajectory(),
            grid=SamplingGrid(**self.grid.model_dump()),
            scatter_config=ScatterConfig(**self.scatter_config.model_dump()),
            seed=self.seed,
        )


# --------------------------------------------------------------------------
# Run configuration
# --------------------------------------------------------------------------

STAGES = ("load", "scatter", "mpc", "ctf", "analyze", "emulate", "fer")


class ModeModel(_Strict):
    kind: Literal["per_snapshot", "per_region"] = "per_region"
    region_length: int | None = None


class AntennaModel(_Strict):
    kind: Literal["isotropic", "tabulated"] = "isotropic"
    # tabulated: gains[el][az] as [re, im] pairs on the given grids (radians)
    azimuth: list[FiniteFloat] | None = None
    elevation: list[FiniteFloat] | None = None
    gains: list[list[Annotated[list[FiniteFloat], Field(min_length=2, max_length=2)]]] | None = None


class FilterModel(_Strict):
    kind: Literal["ones", "raised_cosine"] = "ones"
    rolloff: FiniteFloat = 0.1


class ModemModel(_Strict):
    constellation: Literal["QPSK"] = "QPSK"
    frames_per_position: int = Field(default=400, ge=1)
    position_window: int = Field(default=32, ge=1)
    snr_db: float = 10.0


class EmulationModel(_Strict):
    enabled: bool = True
    nu_max_hz: FiniteFloat = 500.0
    d_extra: int = 0
    c1_bits: FiniteFloat = 32.0


class AnalysisModel(_Strict):
    I: int = 3
    J: int = 3
    W_t: FiniteFloat | None = None
    W_f: FiniteFloat | None = None
    region_length: int | None = None


class RunConfigFile(_Strict):
    scenario: str
    out: str = "out"
    stages: list[Literal[STAGES]] = list(STAGES)  # type: ignore[valid-type]
    block_start_s: FiniteFloat = 0.0
    mode: ModeModel = ModeModel()
    max_order: int = Field(default=2, ge=0, le=3)
    prune_floor_db: FiniteFloat = 40.0
    tx_antenna: AntennaModel = AntennaModel()
    rx_antenna: AntennaModel = AntennaModel()
    filter: FilterModel = FilterModel()
    modem: ModemModel = ModemModel()
    emulation: EmulationModel = EmulationModel()
    analysis: AnalysisModel = AnalysisModel()
    seed: int | None = Field(default=None, ge=0, lt=2**64)
