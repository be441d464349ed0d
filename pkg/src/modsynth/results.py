"""Result, composition and table files (JSON and CSV)."""
import csv
import json
import math

import numpy as np

from .composition import Composition
from .taskfile import FORMAT_VERSION, parse_task, task_to_dict


def _clean(x):
    """JSON-safe copy: arrays to lists, non-finite floats to strings."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_clean(data), fh, indent=2)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def composition_to_dict(comp: Composition):
    return {"format_version": FORMAT_VERSION, "label": comp.label(), **comp.to_dict()}


def save_composition(path, comp: Composition):
    write_json(path, composition_to_dict(comp))


def load_composition(path) -> Composition:
    d = read_json(path)
    if d.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {d.get('format_version')!r}")
    if "composition" in d:  # a result file
        d = d["composition"]
        if d is None:
            raise ValueError(f"{path}: result holds no composition")
    return Composition.from_dict(d)


def result_to_dict(result, task, scene, library_path=None):
    comp = result.composition
    return {
        "format_version": FORMAT_VERSION,
        "feasible": bool(result.feasible),
        "composition": None if comp is None else composition_to_dict(comp),
        "dof": None if comp is None else comp.dof,
        "genome": list(result.genome.genes) if result.genome is not None else None,
        "objective_value": result.objective_value,
        "fitness": result.fitness,
        "ik_solutions": [np.asarray(q).tolist() for q in result.ik_solutions],
        "constraint_report": result.constraint_report,
        "verification": None if result.verification is None else result.verification.to_dict(),
        "evaluations": result.evaluations,
        "generations": len(result.history),
        "settings": result.settings.to_dict(),
        "task": task_to_dict(task, scene, library_path),
    }


def save_result(path, result, task, scene, library_path=None):
    write_json(path, result_to_dict(result, task, scene, library_path))


def load_result(path):
    """Returns ``(dict, TaskSpec, Scene, extras)`` for a result file."""
    d = read_json(path)
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {d.get('format_version')!r}")
    task, scene, extras = parse_task(json.dumps(d["task"]), f"{path}#task")
    return d, task, scene, extras


def write_history_csv(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["generation", "best_fitness", "mean_fitness", "feasible_count", "best_dof"])
        for h in history:
            w.writerow([h.generation, repr(h.best), repr(h.mean), h.feasible, h.best_dof])


def write_path_csv(path, waypoints):
    waypoints = np.atleast_2d(np.asarray(waypoints, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["waypoint_index"] + [f"q{k + 1}_rad" for k in range(waypoints.shape[1])])
        for i, q in enumerate(waypoints):
            w.writerow([i] + [repr(float(x)) for x in q])


def write_torque_csv(path, torques, limits):
    """Long-format torque table: one row per (TSL or waypoint, joint)."""
    torques = np.atleast_2d(np.asarray(torques, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tsl_or_waypoint_index", "joint_index", "torque_Nm", "limit_Nm"])
        for i, row in enumerate(torques):
            for j, t in enumerate(row):
                w.writerow([i, j, repr(float(t)), repr(float(limits[j]))])


def read_torque_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    n = max(int(r["tsl_or_waypoint_index"]) for r in rows) + 1
    m = max(int(r["joint_index"]) for r in rows) + 1
    table = np.zeros((n, m))
    for r in rows:
        table[int(r["tsl_or_waypoint_index"]), int(r["joint_index"])] = float(r["torque_Nm"])
    return table
