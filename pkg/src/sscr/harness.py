"""End-to-end pipeline: scenario -> scatterers -> MPCs -> CTF -> LSF analysis
-> subspace emulation -> link-level FER comparison.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import ValidationError
from scipy.stats import binomtest

from . import artifacts
from .analysis import dsd_of, lsf_regions, pdp_of, rms_spread, spread_cdf
from .channel import AntennaPattern, CtfBlock, FilterResponse, ctf_snapshot
from .dpss import default_tapers
from .emulate import budget_report, emulation_nmse, project_and_reconstruct, subspace_basis
from .geometry import Scenario, ScenarioError, canonical_json, load_scenario
from .mpc import block_mpc_sets, check_region_length
from .scatter import place_scatterers
from .schema import STAGES, AnalysisModel, AntennaModel, EmulationModel, FilterModel, RunConfigFile

log = logging.getLogger(__name__)

MIN_FER_FRAMES = 100


class ConfigError(ValueError):
    """Run configuration is invalid."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# --------------------------------------------------------------------------
# FER experiment
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Modem:
    frames_per_position: int = 400
    position_window: int = 32
    constellation: str = "QPSK"


@dataclass(frozen=True, eq=False)
class FerResult:
    errors: np.ndarray
    trials: int
    ci_low: np.ndarray
    ci_high: np.ndarray

    @property
    def fer(self) -> np.ndarray:
        return self.errors / self.trials


def clopper_pearson(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval."""
    ci = binomtest(int(errors), int(trials)).proportion_ci(confidence_level=confidence, method="exact")
    return float(ci.low), float(ci.high)


def _qpsk(bits: np.ndarray) -> np.ndarray:
    return ((1 - 2 * bits[..., 0]) + 1j * (1 - 2 * bits[..., 1])) / math.sqrt(2)


def _frame_errors(g: np.ndarray, x: np.ndarray, bits: np.ndarray, noise: np.ndarray, sigma: float) -> int:
    y = g * x + sigma * noise
    with np.errstate(divide="ignore", invalid="ignore"):
        x_hat = np.where(g != 0, y / g, 0)
    wrong = ((x_hat.real < 0) != (bits[..., 0] == 1)) | ((x_hat.imag < 0) != (bits[..., 1] == 1))
    return int(np.count_nonzero(np.any(wrong, axis=-1)))


def fer_experiment(
    ctf_exact: CtfBlock,
    ctf_emulated: CtfBlock,
    modem: Modem,
    snr_db: float,
    seed: int,
) -> tuple[FerResult, FerResult]:
    """Uncoded QPSK over every subcarrier with genie zero-forcing equalization.

    A frame is one snapshot; it is in error if any symbol decision is wrong.
    Snapshots are grouped into positions of ``position_window`` consecutive
    rows and each position runs ``frames_per_position`` frames cycling
    through its rows. Both channels see identical symbols and noise drawn from
    a per-position substream of ``seed``. The noise power is set from the mean
    ``|g|^2`` of each block; ``snr_db = inf`` disables noise.
    """
    ge, gm = ctf_exact.g, ctf_emulated.g
    if ge.shape != gm.shape:
        raise ValueError(f"block shapes differ: {ge.shape} vs {gm.shape}")
    M, Q = ge.shape
    if modem.constellation != "QPSK":
        raise ValueError(f"unsupported constellation {modem.constellation!r}")
    if M % modem.position_window:
        raise ValueError(f"position window {modem.position_window} must divide M={M}")
    sigmas = []
    for g in (ge, gm):
        power = float(np.mean(np.abs(g) ** 2))
        if power == 0:
            raise ValueError("degenerate all-zero channel block")
        sigmas.append(0.0 if math.isinf(snr_db) and snr_db > 0 else math.sqrt(power / 10 ** (snr_db / 10)))

    n_pos = M // modem.position_window
    frames = modem.frames_per_position
    errs = np.zeros((2, n_pos), dtype=int)
    for p in range(n_pos):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), p]))
        rows = p * modem.position_window + np.arange(frames) % modem.position_window
        bits = rng.integers(0, 2, size=(frames, Q, 2))
        x = _qpsk(bits)
        noise = (rng.standard_normal((frames, Q)) + 1j * rng.standard_normal((frames, Q))) / math.sqrt(2)
        for i, g in enumerate((ge, gm)):
            errs[i, p] = _frame_errors(g[rows], x, bits, noise, sigmas[i])

    results = []
    for i in range(2):
        ci = np.array([clopper_pearson(k, frames) for k in errs[i]]).reshape(-1, 2)
        results.append(FerResult(errs[i], frames, ci[:, 0], ci[:, 1]))
    return results[0], results[1]


def ci_overlap(a: FerResult, b: FerResult) -> np.ndarray:
    return np.maximum(a.ci_low, b.ci_low) <= np.minimum(a.ci_high, b.ci_high)


# --------------------------------------------------------------------------
# Configuration helpers
# --------------------------------------------------------------------------


def antenna_from_model(model: AntennaModel) -> AntennaPattern:
    if model.kind == "isotropic":
        return AntennaPattern.isotropic()
    if model.azimuth is None or model.elevation is None or model.gains is None:
        raise ConfigError("tabulated antenna needs azimuth, elevation and gains")
    gains = np.array(model.gains, dtype=float)
    return AntennaPattern("tabulated", model.azimuth, model.elevation, gains[..., 0] + 1j * gains[..., 1])


def filter_from_model(model: FilterModel, Q: int) -> FilterResponse:
    if model.kind == "ones":
        return FilterResponse.ones(Q)
    return FilterResponse.raised_cosine(Q, model.rolloff)


def load_run_config(path: str | Path) -> tuple[RunConfigFile, Path]:
    """Parse a run-config JSON file; returns the model and its directory."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read run config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed run config: {exc}") from exc
    return parse_run_config(raw), path.parent


def parse_run_config(raw: dict) -> RunConfigFile:
    try:
        cfg = RunConfigFile.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        raise ConfigError(f"{'.'.join(str(x) for x in err['loc'])}: {err['msg']}") from exc
    if list(cfg.stages) != list(STAGES[: len(cfg.stages)]) or not cfg.stages:
        raise ConfigError(f"stages must be a non-empty prefix of {list(STAGES)}")
    if "fer" in cfg.stages and cfg.modem.frames_per_position < MIN_FER_FRAMES:
        raise ConfigError(f"modem.frames_per_position must be >= {MIN_FER_FRAMES} when the fer stage runs")
    return cfg


def _validate_against_grid(cfg: RunConfigFile, scenario: Scenario):
    M = scenario.grid.M
    try:
        if cfg.mode.kind == "per_region":
            check_region_length(cfg.mode.region_length, M)
        check_region_length(analysis_region_length(cfg, M), M)
        if M % cfg.modem.position_window:
            raise ValueError(f"modem.position_window {cfg.modem.position_window} must divide M={M}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def analysis_region_length(cfg: RunConfigFile, M: int) -> int:
    if cfg.analysis.region_length is not None:
        return cfg.analysis.region_length
    if cfg.mode.kind == "per_region" and cfg.mode.region_length:
        return cfg.mode.region_length
    return M


# --------------------------------------------------------------------------
# Stages that also back the standalone CLI commands
# --------------------------------------------------------------------------


def analyze_block(block: CtfBlock, analysis: AnalysisModel, region_length: int, out: Path) -> list[Path]:
    """LSF per region plus PDP/DSD marginals and RMS-spread CDFs."""
    tapers = default_tapers(region_length, block.grid.Q, analysis.I, analysis.J, analysis.W_t, analysis.W_f)
    estimates = lsf_regions(block, tapers)
    delay_spreads, doppler_spreads = [], []
    for e in estimates:
        if e.C.sum() > 0:
            delay_spreads.append(rms_spread(pdp_of(e)))
            doppler_spreads.append(rms_spread(dsd_of(e)))
    cdfs = {}
    if delay_spreads:
        cdfs["rms_delay_spread_s"] = spread_cdf(delay_spreads)
        cdfs["rms_doppler_spread_hz"] = spread_cdf(doppler_spreads)
    return [
        artifacts.write_lsf_csv(out / "lsf.csv", estimates),
        artifacts.write_pdp_csv(out / "pdp.csv", estimates),
        artifacts.write_dsd_csv(out / "dsd.csv", estimates),
        artifacts.write_cdf_csv(out / "cdf.csv", cdfs),
    ]


def emulate_block(
    block: CtfBlock, emulation: EmulationModel, delay_support_s: float | None, out: Path
) -> tuple[CtfBlock, list[Path]]:
    """Subspace reconstruction of ``block`` and the budget report."""
    basis = subspace_basis(block.grid.M, block.grid.t_snap, emulation.nu_max_hz, emulation.d_extra)
    approx = project_and_reconstruct(block, basis)
    report = budget_report(block.grid, emulation.nu_max_hz, basis.D, emulation.c1_bits, delay_support_s).to_json()
    report["nmse_db"] = emulation_nmse(block, approx) if np.any(block.g) else None
    return approx, [artifacts.write_json(out / "budget.json", report)]


def fer_stage(exact: CtfBlock, emulated: CtfBlock, cfg: RunConfigFile, seed: int, out: Path) -> list[Path]:
    modem = Modem(cfg.modem.frames_per_position, cfg.modem.position_window, cfg.modem.constellation)
    res_exact, res_emul = fer_experiment(exact, emulated, modem, cfg.modem.snr_db, seed)
    overlap = ci_overlap(res_exact, res_emul)
    w = modem.position_window
    rows = [
        (
            p, p * w, (p + 1) * w - 1, res_exact.trials,
            int(res_exact.errors[p]), res_exact.fer[p], res_exact.ci_low[p], res_exact.ci_high[p],
            int(res_emul.errors[p]), res_emul.fer[p], res_emul.ci_low[p], res_emul.ci_high[p],
            int(overlap[p]),
        )
        for p in range(res_exact.errors.size)
    ]
    header = (
        "position", "m_first", "m_last", "frames",
        "errors_exact", "fer_exact", "ci_low_exact", "ci_high_exact",
        "errors_emulated", "fer_emulated", "ci_low_emulated", "ci_high_emulated",
        "ci_overlap",
    )
    return [artifacts.write_csv(out / "fer.csv", header, rows)]


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------


def _manifest(out: Path, files: list[Path], cfg: RunConfigFile, seed: int | None, failed: StageError | None):
    entries = sorted(
        ({"name": f.name, "sha256": artifacts.sha256_file(f), "bytes": f.stat().st_size} for f in files),
        key=lambda e: e["name"],
    )
    doc = {
        "status": "FAILED" if failed else "ok",
        "stages": list(cfg.stages),
        "seed": seed,
        "files": entries,
    }
    if failed:
        doc["failed_stage"] = failed.stage
        doc["error"] = str(failed.cause)
    return artifacts.write_json(out / "manifest.json", doc)


def run_pipeline(
    cfg: RunConfigFile,
    base_dir: str | Path = ".",
    out_dir: str | Path | None = None,
    seed: int | None = None,
) -> dict:
    """Execute the configured stages in order and return the manifest dict.

    Artifacts go to ``out_dir`` (default: ``cfg.out`` relative to
    ``base_dir``). Downstream stages read the CTF back from ``ctf.bin`` so that
    rerunning them from persisted files reproduces the same outputs.

    Raises
    ------
    ScenarioError, ConfigError
        Invalid scenario or configuration; nothing is executed.
    StageError
        A stage failed; the manifest is written with ``status = FAILED``.
    """
    base_dir = Path(base_dir)
    out = Path(out_dir) if out_dir is not None else base_dir / cfg.out
    out.mkdir(parents=True, exist_ok=True)

    scenario = load_scenario(base_dir / cfg.scenario)
    if seed is None:
        seed = cfg.seed
    if seed is not None:
        scenario = scenario.with_seed(seed)
    _validate_against_grid(cfg, scenario)
    seed = scenario.seed

    files: list[Path] = []
    state: dict = {}
    stage = "load"
    try:
        for stage in cfg.stages:
            log.info("stage %s", stage)
            if stage == "load":
                path = out / "scenario.json"
                path.write_text(canonical_json(scenario))
                files.append(path)
            elif stage == "scatter":
                state["scatterers"] = place_scatterers(scenario)
                log.info("%d point scatterers", len(state["scatterers"]))
            elif stage == "mpc":
                state["mpc_sets"] = block_mpc_sets(
                    scenario,
                    cfg.block_start_s,
                    cfg.mode.kind,
                    cfg.mode.region_length,
                    cfg.max_order,
                    cfg.prune_floor_db,
                    state["scatterers"],
                )
                files.append(artifacts.write_mpcs_csv(out / "mpcs.csv", state["mpc_sets"]))
            elif stage == "ctf":
                grid = scenario.grid
                tx_pat, rx_pat = antenna_from_model(cfg.tx_antenna), antenna_from_model(cfg.rx_antenna)
                filt = filter_from_model(cfg.filter, grid.Q)
                g = np.stack([ctf_snapshot(s, grid, tx_pat, rx_pat, filt) for s in state["mpc_sets"]])
                sets = state["mpc_sets"]
                span = max(
                    (max(p.delay_s for p in s) - min(p.delay_s for p in s) for s in sets if len(s)), default=0.0
                )
                files += artifacts.write_ctf(out / "ctf.bin", CtfBlock(g, grid), {"delay_span_s": span})
                state["ctf"], state["ctf_meta"] = artifacts.read_ctf(out / "ctf.bin")
            elif stage == "analyze":
                rl = analysis_region_length(cfg, scenario.grid.M)
                files += analyze_block(state["ctf"], cfg.analysis, rl, out)
            elif stage == "emulate":
                if cfg.emulation.enabled:
                    state["emulated"], new = emulate_block(
                        state["ctf"], cfg.emulation, state["ctf_meta"].get("delay_span_s"), out
                    )
                    files += new
                else:
                    state["emulated"] = state["ctf"]
            elif stage == "fer":
                files += fer_stage(state["ctf"], state["emulated"], cfg, seed, out)
    except Exception as exc:  # noqa: BLE001 - any stage failure is reported the same way
        err = StageError(stage, exc)
        _manifest(out, files, cfg, seed, err)
        raise err from exc

    path = _manifest(out, files, cfg, seed, None)
    return json.loads(path.read_text())


def run_from_file(config_path: str | Path, out_dir=None, seed: int | None = None) -> dict:
    cfg, base = load_run_config(config_path)
    return run_pipeline(cfg, base, out_dir, seed)


__all__ = [
    "ConfigError",
    "FerResult",
    "Modem",
    "ScenarioError",
    "StageError",
    "analyze_block",
    "ci_overlap",
    "clopper_pearson",
    "emulate_block",
    "fer_experiment",
    "load_run_config",
    "parse_run_config",
    "run_from_file",
    "run_pipeline",
]
