import csv
import json
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from helpers import fixture, random_chain, random_q
from modsynth.composition import Composition, build_chain
from modsynth.dynamics import gravity_torque
from modsynth.kinematics import forward_kinematics
from modsynth.library import ModularUnit, default_library
from modsynth.results import (
    load_composition, load_result, read_torque_csv, save_composition, write_history_csv, write_path_csv,
    write_torque_csv,
)
from modsynth.synthesis import GenerationStats
from modsynth.taskfile import TaskFileError, dumps_task, load_task, parse_task
from modsynth.urdf import emit_urdf, parse_urdf

TASKS = ["case1a.json", "case2a.json", "case2b.json", "clutter_grid.json", "wall_gap.json"]


def test_first_case_file():
    task, scene, _ = load_task(fixture("case1a.json"))
    assert len(task.tsls) == 4
    assert all(t.orientation_deg is None for t in task.tsls)
    assert task.tsls[0].position == (0.1, 0.6, 0.5)
    assert task.pos_tol == 1e-3 and task.mode == "full"


def test_shelf_case_file():
    task, scene, _ = load_task(fixture("case2a.json"))
    names = [o.name for o in scene.obstacles]
    assert "tray" in names and any(n.startswith("shelf") for n in names)
    assert all(o.shape.kind == "box" for o in scene.obstacles)
    shelf = scene.obstacles[names.index("shelf1")].shape
    assert np.allclose(shelf.dims, [0.275, 0.275, 0.01])
    assert task.settings["population"] == 40


@pytest.mark.parametrize("name", TASKS)
def test_task_round_trip_is_bitwise(name):
    text = open(fixture(name)).read()
    task, scene, extras = parse_task(text)
    assert dumps_task(task, scene, extras["library"]) == text


def _replace_kind(text, old, new):
    i = text.index(f'"kind": "{old}"')
    return text[:i] + f'"kind": "{new}"' + text[i + len(old) + 10:]


def test_unknown_kind_names_field_and_line():
    text = open(fixture("case2a.json")).read()
    bad = _replace_kind(text, "box", "torus")
    line = bad[:bad.index("torus")].count("\n") + 1
    with pytest.raises(TaskFileError) as info:
        parse_task(bad, "shelf.json")
    msg = str(info.value)
    assert msg.startswith(f"shelf.json:{line}:")
    assert "scene.obstacles[0].kind" in msg and "torus" in msg


def test_task_file_errors():
    d = json.load(open(fixture("case1a.json")))
    cases = [
        ({**d, "tsls": []}, "tsls"),
        ({**d, "tsls": [{"position": [0.1, 0.2]}]}, "tsls[0].position"),
        ({**d, "format_version": 2}, "format_version"),
        ({**d, "mode": "fast"}, "mode"),
        ({**d, "tolerances": {"position": -1}}, "tolerances.position"),
    ]
    for doc, field in cases:
        with pytest.raises(TaskFileError, match=re.escape(f"field '{field}'")):
            parse_task(json.dumps(doc, indent=2))
    with pytest.raises(TaskFileError, match="parse error"):
        parse_task("{\n  \"tsls\": [\n")


def test_duplicate_obstacle_names():
    d = json.load(open(fixture("case2a.json")))
    d["scene"]["obstacles"][1]["name"] = "shelf1"
    with pytest.raises(TaskFileError, match="duplicate"):
        parse_task(json.dumps(d, indent=2))


def _chains(n):
    rng = np.random.default_rng(20)
    return [(rng, *random_chain(rng)) for _ in range(n)]


def test_urdf_round_trip_kinematics():
    for rng, ch, _ in _chains(20):
        back = parse_urdf(emit_urdf(ch))
        assert back.dof == ch.dof
        for _ in range(100):
            q = random_q(rng, ch)
            a, ea = forward_kinematics(ch, q)
            b, eb = forward_kinematics(back, q)
            assert np.abs(a - b).max() <= 1e-9 and np.abs(ea - eb).max() <= 1e-9


def test_urdf_round_trip_dynamics_and_limits():
    for rng, ch, _ in _chains(5):
        back = parse_urdf(emit_urdf(ch))
        q = random_q(rng, ch)
        assert np.abs(gravity_torque(ch, q) - gravity_torque(back, q)).max() <= 1e-9
        assert np.allclose(back.joint_limits, ch.joint_limits, atol=1e-12)
        assert np.array_equal(back.effort_limits, ch.effort_limits)
        assert back.total_mass() == pytest.approx(ch.total_mass(), abs=1e-9)
        assert [s.kind for b in back.bodies for s in b.shapes] == [s.kind for b in ch.bodies for s in b.shapes]


def test_urdf_reemission_is_byte_identical():
    for _, ch, _ in _chains(10):
        text = emit_urdf(ch, "r")
        assert emit_urdf(parse_urdf(text), "r") == text
        assert emit_urdf(ch, "r") == text


def test_urdf_contents():
    ch = build_chain(Composition([ModularUnit("H", 1), ModularUnit("H", 3, 30, "S2"), ModularUnit("L", 4, 0, "C1")]),
                     default_library())
    root = ET.fromstring(emit_urdf(ch))
    joints = [j for j in root.findall("joint") if j.get("type") == "revolute"]
    assert len(joints) == 3
    lim = joints[0].find("limit")
    assert float(lim.get("velocity")) == pytest.approx(1.2776, abs=1e-4)
    assert float(lim.get("effort")) == 12.0
    assert float(joints[2].find("limit").get("effort")) == 3.6
    # capsules are lowered to a cylinder and two spheres
    kinds = [c.find("geometry")[0].tag for c in root.iter("collision")]
    assert "capsule" not in kinds and kinds.count("sphere") >= 2
    children = {j.find("child").get("link") for j in root.findall("joint")}
    assert [l.get("name") for l in root.findall("link") if l.get("name") not in children] == ["base_link"]


def test_urdf_rejects_foreign_input():
    with pytest.raises(ValueError):
        parse_urdf('<robot name="x"><link name="a"/></robot>')
    with pytest.raises(ValueError):
        parse_urdf('<robot name="x"><link name="a"/><link name="b"/></robot>')


def test_composition_file_round_trip(tmp_path):
    c = Composition([ModularUnit("H", 1, 15), ModularUnit("H", 3, -45, "S2"), ModularUnit("L", 4, 90, "C1"),
                     ModularUnit("L", 2)])
    save_composition(tmp_path / "c.json", c)
    assert load_composition(tmp_path / "c.json") == c
    assert json.load(open(tmp_path / "c.json"))["label"] == c.label()


def test_result_file():
    data, task, scene, _ = load_result(fixture("golden/case1a_seed7/result.json"))
    comp = load_composition(fixture("golden/case1a_seed7/result.json"))
    assert comp == load_composition(fixture("golden/case1a_seed7/composition.json"))
    assert data["dof"] == comp.dof == len(data["ik_solutions"][0])
    assert len(data["ik_solutions"]) == len(task.tsls) == 4
    assert data["feasible"] and data["verification"]["ok"]
    assert data["fitness"] == data["objective_value"]


def test_csv_columns(tmp_path):
    write_torque_csv(tmp_path / "t.csv", [[1.0, -2.0], [0.5, 0.25]], [12.0, 3.6])
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["tsl_or_waypoint_index", "joint_index", "torque_Nm", "limit_Nm"]
    assert len(rows) == 5 and rows[2] == ["0", "1", "-2.0", "3.6"]
    assert np.array_equal(read_torque_csv(tmp_path / "t.csv"), [[1.0, -2.0], [0.5, 0.25]])
    write_path_csv(tmp_path / "p.csv", [[0.0, 1.0], [0.5, 0.1]])
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0] == ["waypoint_index", "q1_rad", "q2_rad"] and rows[2] == ["1", "0.5", "0.1"]
    write_history_csv(tmp_path / "h.csv", [GenerationStats(0, 3.0, 5.0, 2, 4)])
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["generation", "best_fitness", "mean_fitness", "feasible_count", "best_dof"]
    assert rows[1] == ["0", "3.0", "5.0", "2", "4"]
