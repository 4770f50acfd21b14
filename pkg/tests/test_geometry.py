import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sscr.geometry import (
    Box,
    ScenarioError,
    ScenarioParseError,
    ScenarioValidationError,
    Trajectory,
    canonical_json,
    load_scenario,
    sample_trajectory,
    scenario_to_dict,
    segment_visible,
    segments_visible,
)

from conftest import SCENARIO_DIR, CONCRETE, brute_force_visible, make_scenario, wall

MINIMAL = {
    "grid": {"M": 8, "Q": 16, "t_snap": 1e-3, "bandwidth_B": 1e7, "carrier_fc": 2e9},
    "facades": [
        {"corner": [0, 5, 0], "edge_u": [20, 0, 0], "edge_v": [0, 0, 10],
         "material": {"name": "brick", "reflection_loss_db": 6, "diffuse_gain_scale": 1}},
    ],
    "boxes": [],
    "scatterers": [],
    "tx_trajectory": {"waypoints": [{"t": 0, "position": [0, 0, 1]}, {"t": 1, "position": [10, 0, 1]}]},
    "rx_trajectory": {"waypoints": [{"t": 0, "position": [30, 0, 1]}, {"t": 1, "position": [20, 0, 1]}]},
    "scatter_config": {"density_per_m2": 0.0, "gain_mean_db": 0.0, "gain_std_db": 0.0},
    "seed": 3,
}


def _write(tmp_path, doc, name="scen.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_load_minimal(tmp_path):
    scen = load_scenario(_write(tmp_path, MINIMAL))
    assert len(scen.facades) == 1
    assert scen.seed == 3
    assert scen.grid.T_s == pytest.approx(1e-7)


def test_box_expands_to_six_facades(tmp_path):
    doc = dict(MINIMAL, facades=[], boxes=[{"min": [0, 0, 0], "max": [1, 2, 3],
                                             "material": {"name": "m", "reflection_loss_db": 3}}])
    scen = load_scenario(_write(tmp_path, doc))
    assert len(scen.facades) == 6
    assert sorted(f.area for f in scen.facades) == pytest.approx([2, 2, 3, 3, 6, 6])


def test_waypoint_times_must_increase(tmp_path):
    doc = json.loads(json.dumps(MINIMAL))
    doc["tx_trajectory"]["waypoints"] = [
        {"t": t, "position": [t, 0, 1]} for t in (0, 1, 1)
    ]
    with pytest.raises(ScenarioValidationError, match="waypoint times strictly increasing"):
        load_scenario(_write(tmp_path, doc))


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d.update(colour="red"), "colour"),
        (lambda d: d["grid"].update(M=7), "M"),
        (lambda d: d["grid"].update(carrier_fc=1e6), "carrier_fc"),
        (lambda d: d["facades"][0].update(edge_v=[40, 0, 0]), "facade"),
        (lambda d: d["facades"][0]["material"].update(reflection_loss_db=-1), "reflection_loss_db"),
        (lambda d: d["scatter_config"].update(density_per_m2=-1), "density_per_m2"),
        (lambda d: d.update(scatterers=[{"position": [0, 0, 0], "velocity": [1, 0, 0], "gain_dbsm": 0,
                                          "kind": "static"}]), "static"),
    ],
)
def test_validation_errors_name_the_violation(tmp_path, mutate, message):
    doc = json.loads(json.dumps(MINIMAL))
    mutate(doc)
    with pytest.raises(ScenarioValidationError, match=message):
        load_scenario(_write(tmp_path, doc))


def test_parse_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ScenarioParseError):
        load_scenario(path)
    assert issubclass(ScenarioParseError, ScenarioError)
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "missing.json")


def test_load_is_deterministic():
    path = SCENARIO_DIR / "canonical_vehicular.json"
    assert canonical_json(load_scenario(path)) == canonical_json(load_scenario(path))


def test_canonical_json_roundtrip(tmp_path):
    scen = load_scenario(SCENARIO_DIR / "canonical_vehicular.json")
    again = load_scenario(_write(tmp_path, scenario_to_dict(scen)))
    assert canonical_json(again) == canonical_json(scen)
    assert len(again.facades) == len(scen.facades)


class TestSampleTrajectory:
    traj = Trajectory.from_waypoints([(0.0, (0, 0, 0)), (10.0, (100, 0, 0))])

    def test_linear_interpolation(self):
        pose = sample_trajectory(self.traj, 5.0)
        np.testing.assert_allclose(pose.position, [50, 0, 0])
        np.testing.assert_allclose(pose.velocity, [10, 0, 0])

    def test_single_waypoint(self):
        traj = Trajectory.from_waypoints([(2.0, (1, 2, 3))])
        pose = sample_trajectory(traj, 2.0)
        np.testing.assert_array_equal(pose.position, [1, 2, 3])
        np.testing.assert_array_equal(pose.velocity, [0, 0, 0])

    def test_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            sample_trajectory(self.traj, 10.5)
        with pytest.raises(ValueError):
            sample_trajectory(self.traj, -1.0)

    def test_shared_waypoint_takes_later_segment(self):
        traj = Trajectory.from_waypoints([(0, (0, 0, 0)), (1, (1, 0, 0)), (2, (1, 3, 0))])
        pose = sample_trajectory(traj, 1.0)
        np.testing.assert_allclose(pose.position, [1, 0, 0])
        np.testing.assert_allclose(pose.velocity, [0, 3, 0])
        np.testing.assert_allclose(sample_trajectory(traj, 2.0).velocity, [0, 3, 0])

    @given(st.floats(0.0, 2.0))
    def test_position_continuous(self, t):
        traj = Trajectory.from_waypoints([(0, (0, 0, 0)), (1, (1, 0, 0)), (2, (1, 3, 0))])
        eps = 1e-7
        p0 = sample_trajectory(traj, max(t - eps, 0)).position
        p1 = sample_trajectory(traj, min(t + eps, 2)).position
        assert np.linalg.norm(p1 - p0) <= 3 * 2 * eps + 1e-12


class TestVisibility:
    def test_blocking_facade(self):
        scen = make_scenario([wall((5, -1, 0), (0, 2, 0), (0, 0, 2))])
        assert not segment_visible((0, 0, 1), (10, 0, 1), scen)
        assert segment_visible((0, 0, 1), (10, 0, 1), scen, ignore=[0])
        assert segment_visible((0, 0, 3), (10, 0, 3), scen)

    def test_empty_environment(self):
        assert segment_visible((0, 0, 1), (10, 0, 1), make_scenario())

    def test_edge_touch_is_blocked(self):
        scen = make_scenario([wall((5, -1, 0), (0, 2, 0), (0, 0, 1))])
        assert not segment_visible((0, 0, 1), (10, 0, 1), scen)
        assert not segment_visible((0, 1, 0.5), (10, 1, 0.5), scen)

    def test_endpoint_on_facade_is_not_blocked(self):
        scen = make_scenario([wall((5, -1, 0), (0, 2, 0), (0, 0, 2))])
        assert segment_visible((0, 0, 1), (5, 0, 1), scen)

    def test_coplanar_segment(self):
        scen = make_scenario([wall((0, 0, 0), (10, 0, 0), (0, 0, 5))])
        assert not segment_visible((-5, 0, 1), (5, 0, 1), scen)
        assert segment_visible((-5, 0, 7), (5, 0, 7), scen)

    def test_box_blocks(self):
        scen = make_scenario(boxes=[Box(np.array([4, -1, 0]), np.array([6, 1, 2]), CONCRETE, "b")])
        assert not segment_visible((0, 0, 1), (10, 0, 1), scen)
        assert segment_visible((0, 0, 3), (10, 0, 3), scen)

    def test_random_queries_match_triangle_oracle(self):
        rng = np.random.default_rng(11)
        mismatches = 0
        for _ in range(1000):
            n_fac = rng.integers(1, 4)
            facades = [
                wall(rng.uniform(-5, 5, 3), rng.uniform(-6, 6, 3), rng.uniform(-6, 6, 3)) for _ in range(n_fac)
            ]
            scen = make_scenario(facades)
            a, b = rng.uniform(-10, 10, 3), rng.uniform(-10, 10, 3)
            mismatches += segment_visible(a, b, scen) != brute_force_visible(a, b, facades)
        assert mismatches == 0

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=6, max_size=6), st.integers(0, 2**31 - 1))
    def test_symmetry(self, coords, seed):
        rng = np.random.default_rng(seed)
        facades = [wall(rng.uniform(-5, 5, 3), rng.uniform(-6, 6, 3), rng.uniform(-6, 6, 3)) for _ in range(3)]
        scen = make_scenario(facades)
        a, b = np.array(coords[:3]), np.array(coords[3:])
        if np.allclose(a, b):
            return
        assert segment_visible(a, b, scen) == segment_visible(b, a, scen)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(5)
        facades = [wall(rng.uniform(-5, 5, 3), rng.uniform(-6, 6, 3), rng.uniform(-6, 6, 3)) for _ in range(4)]
        scen = make_scenario(facades)
        a, b = rng.uniform(-10, 10, (200, 3)), rng.uniform(-10, 10, (200, 3))
        vec = segments_visible(a, b, scen)
        assert list(vec) == [segment_visible(x, y, scen) for x, y in zip(a, b)]
