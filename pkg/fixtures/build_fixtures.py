"""Regenerate the scene fixtures in this directory.

    python3 fixtures/build_fixtures.py

Box sizes are full extents in metres; orientations are XYZ Euler degrees.
"""
import json
import os

from modsynth.taskfile import dumps_task, parse_task

HERE = os.path.dirname(os.path.abspath(__file__))


def box(name, size, xyz):
    return {"name": name, "kind": "box", "size": list(size), "xyz": list(xyz), "rpy_deg": [0.0, 0.0, 0.0]}


def farm_cell(x0=0.32, depth=0.55, width=0.55, height=0.7, shelf_z=(0.0, 0.24, 0.48), t=0.02):
    """Open-front rack: shelf boards, a top, a back panel and two side panels."""
    xc = x0 + depth / 2
    obs = [box(f"shelf{i + 1}", (depth, width, t), (xc, 0.0, z + t / 2)) for i, z in enumerate(shelf_z)]
    obs.append(box("top", (depth, width, t), (xc, 0.0, height - t / 2)))
    obs.append(box("back", (t, width, height), (x0 + depth - t / 2, 0.0, height / 2)))
    for side, y in (("left", width / 2 - t / 2), ("right", -width / 2 + t / 2)):
        obs.append(box(f"side_{side}", (depth, t, height), (xc, y, height / 2)))
    return obs


TRAY = box("tray", (0.3, 0.3, 0.1), (-0.05, -0.32, 0.05))
PICK = [-0.05, -0.32, 0.17]


def task(name, tsls, obstacles, settings, margin=0.01):
    return {
        "format_version": 1,
        "name": name,
        "mode": "full",
        "base_pose": {"xyz": [0.0, 0.0, 0.0], "rpy_deg": [0.0, 0.0, 0.0]},
        "tolerances": {"position": 0.001, "orientation": 0.01},
        "tsls": tsls,
        "scene": {"safety_margin": margin, "obstacles": obstacles},
        "settings": settings,
    }


def case1a():
    tsls = [(0.1, 0.6, 0.5), (0.4, 0.6, 0.4), (0.6, -0.1, 0.3), (0.4, -0.2, 0.1)]
    centres = [(0.25, 0.45, 0.45), (0.25, 0.62, 0.2), (0.55, 0.3, 0.35), (0.5, 0.1, 0.15), (0.6, -0.3, 0.45),
               (0.2, -0.38, 0.25), (-0.3, 0.3, 0.3), (-0.3, -0.3, 0.5), (0.0, 0.45, 0.75), (0.45, -0.1, 0.55)]
    obstacles = [box(f"box{i + 1}", (0.1, 0.1, 0.1), c) for i, c in enumerate(centres)]
    return task("case1a", [{"position": list(p)} for p in tsls], obstacles,
                {"population": 40, "generations": 40, "stall_generations": 15, "ik_seeds": 12})


def case2a():
    """Pick above the seedling tray, then five drop points along the middle shelf."""
    drops = [[0.42, y, 0.33] for y in (-0.16, -0.08, 0.0, 0.08, 0.16)]
    return task("case2a", [{"position": p} for p in [PICK] + drops], farm_cell() + [TRAY],
                {"population": 40, "generations": 60})


def case2b():
    """Oriented TSLs: tool z-axis into the rack at two shelf levels and down into the tray."""
    tsls = [
        {"position": PICK, "orientation_xyz_deg": [180.0, 0.0, 0.0]},
        {"position": [0.40, -0.1, 0.33], "orientation_xyz_deg": [0.0, 90.0, 0.0]},
        {"position": [0.40, 0.12, 0.12], "orientation_xyz_deg": [0.0, 90.0, 0.0]},
    ]
    return task("case2b", tsls, farm_cell() + [TRAY], {"population": 40, "generations": 60})


GRID_TSLS = [(0.279, -0.293, 0.329), (0.342, -0.212, 0.334), (0.105, -0.368, 0.373)]


def clutter_grid(spacing=0.25, offset=(-0.052, 0.078, -0.055), keep=0.13, zlevels=(0.1, 0.3, 0.5)):
    """Lattice of 0.1 m cubes; cubes near the base axis or within ``keep`` of a TSL are left out."""
    import numpy as np

    obstacles = []
    grid = np.arange(-0.6, 0.61, spacing)
    for z in zlevels:
        for x in grid + offset[0]:
            for y in grid + offset[1]:
                c = np.array([x, y, z + offset[2]])
                if np.hypot(x, y) < 0.14 or np.min(np.linalg.norm(np.array(GRID_TSLS) - c, axis=1)) < keep:
                    continue
                obstacles.append(box(f"g{len(obstacles) + 1}", (0.1, 0.1, 0.1), [round(float(v), 4) for v in c]))
    return task("clutter_grid", [{"position": list(p)} for p in GRID_TSLS], obstacles,
                {"population": 40, "generations": 40})


def wall_gap(gap=0.3, x=0.3, thickness=0.05, height=0.3):
    """Two wall segments in the plane x = ``x`` leaving a slot of width ``gap`` around y = 0."""
    half = 0.5
    obstacles = [
        box(name, (thickness, half, height), (x, sign * (gap / 2 + half / 2), 0.0))
        for name, sign in (("wall_left", 1.0), ("wall_right", -1.0))
    ]
    return task("wall_gap", [{"position": [0.5, 0.0, 0.0]}], obstacles, {}, margin=0.0)


def write(d):
    t, scene, _ = parse_task(json.dumps(d))
    path = os.path.join(HERE, f"{d['name']}.json")
    with open(path, "w") as fh:
        fh.write(dumps_task(t, scene))
    print("wrote", path)


if __name__ == "__main__":
    for build in (case1a, case2a, case2b, clutter_grid, wall_gap):
        write(build())
