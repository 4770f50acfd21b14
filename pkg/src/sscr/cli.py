"""Command line interface: ``sscr run | analyze | emulate | jcas``.

Exit codes: 0 success, 2 validation error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from . import artifacts
from .geometry import ScenarioError
from .harness import ConfigError, StageError, analyze_block, emulate_block, run_from_file
from .jcas import RadarTarget, backscatter_pathloss_db
from .schema import AnalysisModel, EmulationModel

EXIT_OK, EXIT_VALIDATION, EXIT_STAGE = 0, 2, 3


def _cmd_run(args) -> int:
    manifest = run_from_file(args.config, args.out, args.seed)
    print(json.dumps({"status": manifest["status"], "files": [f["name"] for f in manifest["files"]]}))
    return EXIT_OK


def _load_ctf(path):
    try:
        return artifacts.read_ctf(Path(path))
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_analyze(args) -> int:
    block, _ = _load_ctf(args.ctf)
    try:
        analysis = AnalysisModel(I=args.I, J=args.J, W_t=args.w_t, W_f=args.w_f)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
    region = args.region_length or block.grid.M
    if block.grid.M % region:
        raise ConfigError(f"region length {region} must divide M={block.grid.M}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        files = analyze_block(block, analysis, region, out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps({"files": [f.name for f in files]}))
    return EXIT_OK


def _cmd_emulate(args) -> int:
    block, meta = _load_ctf(args.ctf)
    emulation = EmulationModel(nu_max_hz=args.nu_max, d_extra=args.d_extra, c1_bits=args.c1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        approx, files = emulate_block(block, emulation, meta.get("delay_span_s"), out)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    files += artifacts.write_ctf(out / "ctf_emulated.bin", approx)
    print((out / "budget.json").read_text(), end="")
    return EXIT_OK


def _cmd_jcas(args) -> int:
    try:
        target = RadarTarget(args.sigma, args.d1, args.d2)
        loss = backscatter_pathloss_db(target, args.f)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps({"d1_m": args.d1, "d2_m": args.d2, "sigma_m2": args.sigma, "f_hz": args.f,
                      "pathloss_db": loss}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sscr", description="Site-specific radio channel toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the pipeline from a run-config JSON")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("analyze", help="LSF / PDP / DSD / CDF of a CTF block")
    p.add_argument("ctf")
    p.add_argument("--out", default=".")
    p.add_argument("--region-length", type=int, default=None)
    p.add_argument("--I", type=int, default=3)
    p.add_argument("--J", type=int, default=3)
    p.add_argument("--w-t", type=float, default=None)
    p.add_argument("--w-f", type=float, default=None)
    p.add_argument("--seed", type=int, default=None, help="accepted for interface symmetry; analysis is deterministic")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("emulate", help="subspace emulation of a CTF block")
    p.add_argument("ctf")
    p.add_argument("--nu-max", type=float, required=True)
    p.add_argument("--d-extra", type=int, default=0)
    p.add_argument("--c1", type=float, default=32.0, help="bits per complex sample")
    p.add_argument("--out", default=".")
    p.add_argument("--seed", type=int, default=None, help="accepted for interface symmetry; emulation is deterministic")
    p.set_defaults(func=_cmd_emulate)

    p = sub.add_parser("jcas", help="backscatter path loss")
    p.add_argument("--d1", type=float, required=True)
    p.add_argument("--d2", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--f", type=float, required=True)
    p.set_defaults(func=_cmd_jcas)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, ConfigError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
