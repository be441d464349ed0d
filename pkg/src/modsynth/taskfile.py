"""Reading and writing task files (TSLs, scene and solver settings as JSON).

Files use metres and degrees; everything in memory is radians.  Obstacles keep
the file fields they were read from so that a canonical file round-trips
exactly.
"""
import json
import math
import re

from .collision import Obstacle, Primitive, Scene
from .dynamics import Payload
from .task import MODES, TaskSpec, Tsl
from .transforms import make_transform, matrix_to_rpy, rpy_to_matrix

FORMAT_VERSION = 1


class TaskFileError(ValueError):
    """Schema or parse problem in a task file; the message names field and line."""


def _line_of(text, needle):
    if text is None or needle is None:
        return None
    i = text.find(needle)
    return None if i < 0 else text.count("\n", 0, i) + 1


class _Reader:
    def __init__(self, text, source):
        self.text = text
        self.source = source

    def fail(self, field, message, needle=None):
        line = _line_of(self.text, needle if needle is not None else f'"{field.split(".")[-1].split("[")[0]}"')
        where = f"{self.source}:{line}" if line else self.source
        raise TaskFileError(f"{where}: field '{field}': {message}")

    def number(self, value, field, positive=False, nonneg=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(field, f"expected a number, got {value!r}")
        if positive and not value > 0:
            self.fail(field, f"must be positive, got {value!r}")
        if nonneg and value < 0:
            self.fail(field, f"must be non-negative, got {value!r}")
        return float(value)

    def vec3(self, value, field):
        if not isinstance(value, list) or len(value) != 3:
            self.fail(field, f"expected a list of 3 numbers, got {value!r}")
        return [self.number(v, field) for v in value]


def _pose_from(r: _Reader, d, field):
    xyz = r.vec3(d.get("xyz", [0.0, 0.0, 0.0]), f"{field}.xyz")
    rpy = r.vec3(d.get("rpy_deg", [0.0, 0.0, 0.0]), f"{field}.rpy_deg")
    return make_transform(rpy_to_matrix(*(math.radians(a) for a in rpy)), xyz), xyz, rpy


def _obstacle(r: _Reader, d, i):
    field = f"scene.obstacles[{i}]"
    if not isinstance(d, dict):
        r.fail(field, "expected an object")
    kind = d.get("kind")
    name = d.get("name", f"obstacle_{i}")
    if kind == "box":
        size = r.vec3(d.get("size"), f"{field}.size")
        if not all(s > 0 for s in size):
            r.fail(f"{field}.size", f"box sizes must be positive, got {size}")
        dims = tuple(0.5 * s for s in size)
        meta = {"size": size}
    elif kind == "sphere":
        dims = (r.number(d.get("radius"), f"{field}.radius", positive=True),)
        meta = {"radius": dims[0]}
    elif kind in ("cylinder", "capsule"):
        dims = (r.number(d.get("radius"), f"{field}.radius", positive=True),
                r.number(d.get("length"), f"{field}.length", positive=True))
        meta = {"radius": dims[0], "length": dims[1]}
    else:
        r.fail(f"{field}.kind", f"unknown obstacle kind {kind!r} (expected box, sphere, cylinder or capsule)",
               needle=f'"{kind}"' if isinstance(kind, str) else None)
    pose, xyz, rpy = _pose_from(r, d, field)
    meta.update(xyz=xyz, rpy_deg=rpy)
    return Obstacle(str(name), Primitive(kind, dims, pose), meta)


def parse_task(text, source="<task>"):
    """Parse task-file text into ``(TaskSpec, Scene, extras)``.

    ``extras`` holds the optional ``library`` path given in the file.
    """
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskFileError(f"{source}:{exc.lineno}: parse error: {exc.msg}") from None
    r = _Reader(text, source)
    if not isinstance(d, dict):
        r.fail("<root>", "expected a JSON object")
    version = d.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        r.fail("format_version", f"unsupported version {version!r}")
    raw_tsls = d.get("tsls")
    if not isinstance(raw_tsls, list) or not raw_tsls:
        r.fail("tsls", "expected a non-empty list")
    tsls = []
    for i, t in enumerate(raw_tsls):
        if not isinstance(t, dict):
            r.fail(f"tsls[{i}]", "expected an object")
        pos = r.vec3(t.get("position"), f"tsls[{i}].position")
        ori = t.get("orientation_xyz_deg")
        tsls.append(Tsl(tuple(pos), None if ori is None else tuple(r.vec3(ori, f"tsls[{i}].orientation_xyz_deg"))))
    tol = d.get("tolerances", {})
    pos_tol = r.number(tol.get("position", 1e-3), "tolerances.position", positive=True)
    ori_tol = r.number(tol.get("orientation", 1e-2), "tolerances.orientation", positive=True)
    mode = d.get("mode", "full")
    if mode not in MODES:
        r.fail("mode", f"must be one of {MODES}, got {mode!r}")
    base, base_xyz, base_rpy = _pose_from(r, d.get("base_pose", {}), "base_pose")
    payload = None
    if d.get("payload") is not None:
        p = d["payload"]
        payload = Payload(r.number(p.get("mass", 0.0), "payload.mass", nonneg=True),
                          r.vec3(p.get("offset", [0.0, 0.0, 0.0]), "payload.offset"))
    sc = d.get("scene", {})
    margin = r.number(sc.get("safety_margin", 0.01), "scene.safety_margin", nonneg=True)
    obstacles = [_obstacle(r, o, i) for i, o in enumerate(sc.get("obstacles", []))]
    names = [o.name for o in obstacles]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        r.fail("scene.obstacles", f"duplicate obstacle names {sorted(dup)}", needle=f'"{sorted(dup)[0]}"')
    settings = d.get("settings", {})
    if not isinstance(settings, dict):
        r.fail("settings", "expected an object")
    task = TaskSpec(tsls, base, payload, pos_tol, ori_tol, mode, d.get("name", "task"), dict(settings),
                    base_meta={"xyz": base_xyz, "rpy_deg": base_rpy})
    return task, Scene(obstacles, margin), {"library": d.get("library")}


def load_task(path):
    """Load a task file; returns ``(TaskSpec, Scene, extras)``."""
    with open(path) as fh:
        text = fh.read()
    return parse_task(text, str(path))


def _obstacle_dict(o: Obstacle):
    meta = getattr(o, "meta", None) or {}
    s = o.shape
    d = {"name": o.name, "kind": s.kind}
    if s.kind == "box":
        d["size"] = meta.get("size", [2 * h for h in s.dims])
    elif s.kind == "sphere":
        d["radius"] = meta.get("radius", s.dims[0])
    else:
        d["radius"] = meta.get("radius", s.dims[0])
        d["length"] = meta.get("length", s.dims[1])
    d["xyz"] = meta.get("xyz", s.pose[:3, 3].tolist())
    d["rpy_deg"] = meta.get("rpy_deg", [math.degrees(a) for a in matrix_to_rpy(s.pose[:3, :3])])
    return d


def task_to_dict(task: TaskSpec, scene: Scene, library=None):
    base_meta = task.base_meta or {
        "xyz": task.base_pose[:3, 3].tolist(),
        "rpy_deg": [math.degrees(a) for a in matrix_to_rpy(task.base_pose[:3, :3])],
    }
    d = {
        "format_version": FORMAT_VERSION,
        "name": task.name,
        "mode": task.mode,
        "base_pose": base_meta,
        "tolerances": {"position": task.pos_tol, "orientation": task.ori_tol},
        "tsls": [
            {"position": list(t.position)}
            | ({"orientation_xyz_deg": list(t.orientation_deg)} if t.orientation_deg is not None else {})
            for t in task.tsls
        ],
        "scene": {"safety_margin": scene.safety_margin, "obstacles": [_obstacle_dict(o) for o in scene.obstacles]},
    }
    if task.payload is not None:
        d["payload"] = {"mass": task.payload.mass, "offset": task.payload.offset.tolist()}
    if task.settings:
        d["settings"] = task.settings
    if library:
        d["library"] = library
    return d


def dumps_task(task, scene, library=None):
    text = json.dumps(task_to_dict(task, scene, library), indent=2)
    # keep short numeric lists on one line
    return re.sub(r"\[\s+([-0-9.eE+,\s]+?)\s+\]", lambda m: "[" + re.sub(r"\s+", " ", m.group(1)) + "]", text) + "\n"


def save_task(path, task, scene, library=None):
    with open(path, "w") as fh:
        fh.write(dumps_task(task, scene, library))
