"""Site-specific radio channel simulation toolkit.

Geometry-based (quasi-deterministic) multipath enumeration, time-variant
channel transfer functions, multitaper local scattering function analysis and
reduced-rank DPSS subspace emulation.
"""
from .analysis import LsfEstimate, MarginalProfile, dsd_of, lsf, lsf_regions, pdp_of, rms_spread, spread_cdf
from .channel import (
    AntennaPattern,
    CtfBlock,
    FilterResponse,
    apply_channel,
    ctf_block,
    ctf_snapshot,
    simulate_block,
)
from .dpss import DpssSet, TaperSet2D, default_tapers, dpss, tapers_2d
from .emulate import (
    EmulatorBudget,
    SubspaceBasis,
    budget_report,
    emulation_nmse,
    project_and_reconstruct,
    project_mpcs,
    subspace_basis,
)
from .geometry import (
    SPEED_OF_LIGHT,
    Box,
    DiscreteScatterer,
    Facade,
    Material,
    Pose,
    SamplingGrid,
    Scenario,
    Trajectory,
    load_scenario,
    sample_trajectory,
    segment_visible,
)
from .jcas import RadarTarget, backscatter_pathloss_db, target_return_power_dbm
from .mpc import Mpc, MpcSet, diffuse_mpcs, doppler_of, enumerate_mpcs, los_mpc, specular_mpcs
from .scatter import PointScatterer, ScatterConfig, place_scatterers

__version__ = "0.1.0"
