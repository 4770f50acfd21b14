import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from sscr import artifacts
from sscr.cli import main

from conftest import SCENARIO_DIR


@pytest.fixture()
def workdir(tmp_path):
    for name in ("canonical_vehicular.json", "canonical_vehicular_run.json"):
        shutil.copy(SCENARIO_DIR / name, tmp_path / name)
    return tmp_path


@pytest.fixture()
def ctf_file(workdir):
    cfg = json.loads((workdir / "canonical_vehicular_run.json").read_text())
    cfg["stages"] = ["load", "scatter", "mpc", "ctf"]
    (workdir / "ctf_only.json").write_text(json.dumps(cfg))
    assert main(["run", str(workdir / "ctf_only.json"), "--out", str(workdir / "base")]) == 0
    return workdir / "base" / "ctf.bin"


def test_run(workdir, capsys):
    code = main(["run", str(workdir / "canonical_vehicular_run.json"), "--out", str(workdir / "out")])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["status"] == "ok"
    assert "fer.csv" in summary["files"]
    assert (workdir / "out" / "manifest.json").exists()


def test_run_default_out_is_relative_to_config(workdir):
    cfg = json.loads((workdir / "canonical_vehicular_run.json").read_text())
    cfg["stages"] = ["load"]
    (workdir / "load.json").write_text(json.dumps(cfg))
    assert main(["run", str(workdir / "load.json")]) == 0
    assert (workdir / "out_vehicular" / "scenario.json").exists()


def test_run_seed_override(workdir):
    cfg = json.loads((workdir / "canonical_vehicular_run.json").read_text())
    cfg["stages"] = ["load"]
    (workdir / "load.json").write_text(json.dumps(cfg))
    assert main(["run", str(workdir / "load.json"), "--seed", "5", "--out", str(workdir / "s")]) == 0
    assert json.loads((workdir / "s" / "manifest.json").read_text())["seed"] == 5
    assert json.loads((workdir / "s" / "scenario.json").read_text())["seed"] == 5


def test_analyze(ctf_file, workdir, capsys):
    out = workdir / "an"
    assert main(["analyze", str(ctf_file), "--out", str(out), "--region-length", "128"]) == 0
    assert sorted(json.loads(capsys.readouterr().out.splitlines()[-1])["files"]) == \
        ["cdf.csv", "dsd.csv", "lsf.csv", "pdp.csv"]
    header, rows = artifacts.read_csv(out / "pdp.csv")
    assert len(rows) == 4 * 64


def test_analyze_bad_region(ctf_file, workdir):
    assert main(["analyze", str(ctf_file), "--out", str(workdir / "an"), "--region-length", "100"]) == 2
    assert main(["analyze", str(ctf_file), "--out", str(workdir / "an"), "--I", "5", "--w-t", "0.002"]) == 2


def test_emulate(ctf_file, workdir, capsys):
    out = workdir / "em"
    assert main(["emulate", str(ctf_file), "--nu-max", "500", "--d-extra", "2", "--out", str(out)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report == json.loads((out / "budget.json").read_text())
    assert report["D"] == 55
    block, _ = artifacts.read_ctf(out / "ctf_emulated.bin")
    exact, _ = artifacts.read_ctf(ctf_file)
    assert block.g.shape == exact.g.shape
    assert np.linalg.norm(block.g) <= np.linalg.norm(exact.g) * (1 + 1e-6)


def test_emulate_nyquist_violation(ctf_file, workdir):
    assert main(["emulate", str(ctf_file), "--nu-max", "6000", "--out", str(workdir / "em")]) == 2


def test_jcas(capsys):
    assert main(["jcas", "--d1", "100", "--d2", "100", "--sigma", "1", "--f", "3e9"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["pathloss_db"] == pytest.approx(132.9823, abs=1e-3)


def test_jcas_invalid():
    assert main(["jcas", "--d1", "-1", "--d2", "100", "--sigma", "1", "--f", "3e9"]) == 2


def test_validation_exit_codes(workdir, tmp_path):
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    bad = workdir / "bad.json"
    bad.write_text(json.dumps({"scenario": "canonical_vehicular.json", "stages": ["mpc"]}))
    assert main(["run", str(bad)]) == 2
    scen = json.loads((workdir / "canonical_vehicular.json").read_text())
    scen["grid"]["M"] = 7
    (workdir / "odd.json").write_text(json.dumps(scen))
    bad.write_text(json.dumps({"scenario": "odd.json"}))
    assert main(["run", str(bad)]) == 2


def test_stage_failure_exit_code(workdir):
    scen = json.loads((workdir / "canonical_vehicular.json").read_text())
    scen["grid"].update(Q=8, bandwidth_B=2e9)
    (workdir / "tiny.json").write_text(json.dumps(scen))
    cfg = json.loads((workdir / "canonical_vehicular_run.json").read_text())
    cfg.update(scenario="tiny.json", analysis={"region_length": 64})
    (workdir / "fail.json").write_text(json.dumps(cfg))
    assert main(["run", str(workdir / "fail.json"), "--out", str(workdir / "f")]) == 3
    assert json.loads((workdir / "f" / "manifest.json").read_text())["status"] == "FAILED"


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sscr.cli", "jcas", "--d1", "10", "--d2", "20", "--sigma", "2",
                           "--f", "5.9e9"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "pathloss_db" in json.loads(proc.stdout)
