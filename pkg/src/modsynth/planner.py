"""Joint-space path planning between task configurations and path torque checks.

Planning is RRT-connect (two trees grown toward uniform samples, each new
node greedily connected from the other tree) with edges validated by
collision checks at a fixed joint-space resolution.  Torque verification
times each segment with a rest-to-rest trapezoidal velocity profile and runs
inverse dynamics at every densified state.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .collision import Scene, is_collision_free
from .dynamics import Payload, inverse_dynamics

#: time to reach full joint speed under the default acceleration limit
DEFAULT_RAMP_TIME = 0.5


class EndpointInCollision(ValueError):
    """The start or goal configuration is in collision or outside joint limits."""


class PlanningFailed(RuntimeError):
    def __init__(self, iterations, start_tree_size, goal_tree_size):
        super().__init__(f"no path after {iterations} iterations "
                         f"(trees: {start_tree_size} start, {goal_tree_size} goal nodes)")
        self.iterations = iterations
        self.start_tree_size = start_tree_size
        self.goal_tree_size = goal_tree_size


@dataclass
class PlannerSettings:
    step: float = 0.1
    check_resolution: float = 0.02
    max_iterations: int = 20000
    rng_seed: int = 0

    def __post_init__(self):
        if not (self.step > 0 and self.check_resolution > 0 and self.max_iterations >= 1):
            raise ValueError("step, check_resolution and max_iterations must be positive")


def densify(a, b, resolution):
    """States from ``a`` to ``b`` inclusive with max-norm spacing <= ``resolution``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = max(1, int(np.ceil(np.max(np.abs(b - a)) / resolution))) if np.any(a != b) else 1
    s = np.linspace(0.0, 1.0, n + 1)[:, None]
    out = a + s * (b - a)
    out[-1] = b
    return out


@dataclass
class Path:
    waypoints: list
    check_resolution: float = 0.02

    def __post_init__(self):
        self.waypoints = [np.asarray(w, dtype=float) for w in self.waypoints]
        if not self.waypoints:
            raise ValueError("a path needs at least one waypoint")

    def __len__(self):
        return len(self.waypoints)

    def as_array(self):
        return np.array(self.waypoints)

    def length(self):
        w = self.as_array()
        return float(np.sum(np.linalg.norm(np.diff(w, axis=0), axis=1))) if len(w) > 1 else 0.0

    def simplified(self, tol=1e-9):
        """Drop waypoints lying on the straight segment between their neighbours."""
        pts = [self.waypoints[0]]
        for q, nxt in zip(self.waypoints[1:], self.waypoints[2:]):
            a = pts[-1]
            d = nxt - a
            n2 = float(d @ d)
            if n2 > 0:
                t = float((q - a) @ d) / n2
                if 0.0 <= t <= 1.0 and np.max(np.abs(a + t * d - q)) <= tol:
                    continue
            if np.array_equal(q, a):
                continue
            pts.append(q)
        if len(self.waypoints) > 1 and not np.array_equal(self.waypoints[-1], pts[-1]):
            pts.append(self.waypoints[-1])
        return Path(pts, self.check_resolution)

    def densified(self, resolution=None):
        res = resolution or self.check_resolution
        pts = [self.waypoints[0]]
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            pts.extend(densify(a, b, res)[1:])
        return Path(pts, res)


def _within_limits(chain, q):
    lo, hi = chain.joint_limits[:, 0], chain.joint_limits[:, 1]
    return bool(np.all(q >= lo) and np.all(q <= hi))


def state_valid(chain, q, scene: Scene):
    return _within_limits(chain, q) and is_collision_free(chain, q, scene)


def edge_valid(chain, a, b, scene: Scene, resolution):
    """Every interior state of the straight segment is valid (endpoints assumed checked)."""
    return all(state_valid(chain, q, scene) for q in densify(a, b, resolution)[1:-1]) and state_valid(chain, b, scene)


def path_valid(chain, path: Path, scene: Scene, resolution=None):
    return all(state_valid(chain, q, scene) for q in path.densified(resolution).waypoints)


class _Tree:
    def __init__(self, root, dim):
        self.nodes = np.empty((1024, dim))
        self.nodes[0] = root
        self.parent = [-1]
        self.size = 1

    def add(self, q, parent):
        if self.size == len(self.nodes):
            self.nodes = np.concatenate([self.nodes, np.empty_like(self.nodes)])
        self.nodes[self.size] = q
        self.parent.append(parent)
        self.size += 1
        return self.size - 1

    def nearest(self, q):
        d = np.sum((self.nodes[:self.size] - q) ** 2, axis=1)
        return int(np.argmin(d))

    def branch(self, i):
        out = []
        while i >= 0:
            out.append(self.nodes[i].copy())
            i = self.parent[i]
        return out  # node i first, root last


def _steer(a, b, step):
    d = b - a
    n = float(np.linalg.norm(d))
    return b.copy() if n <= step else a + d * (step / n)


def _extend(tree: _Tree, q, chain, scene, s: PlannerSettings):
    """One step from the nearest node toward ``q``: 'reached', 'advanced' or 'trapped'."""
    i = tree.nearest(q)
    near = tree.nodes[i]
    new = _steer(near, q, s.step)
    if not edge_valid(chain, near, new, scene, s.check_resolution):
        return "trapped", i
    j = tree.add(new, i)
    return ("reached" if np.array_equal(new, q) else "advanced"), j


def _connect(tree: _Tree, q, chain, scene, s: PlannerSettings):
    while True:
        status, j = _extend(tree, q, chain, scene, s)
        if status != "advanced":
            return status, j


def plan(chain, scene: Scene, q_start, q_goal, settings: Optional[PlannerSettings] = None) -> Path:
    """RRT-connect path from ``q_start`` to ``q_goal``.

    Raises :class:`EndpointInCollision` if an endpoint is invalid and
    :class:`PlanningFailed` (carrying the tree sizes) when the iteration
    budget runs out.  The returned path is densified to the check resolution
    and starts and ends exactly at the given configurations.
    """
    s = settings or PlannerSettings()
    q_start = np.asarray(q_start, dtype=float).copy()
    q_goal = np.asarray(q_goal, dtype=float).copy()
    for label, q in (("start", q_start), ("goal", q_goal)):
        if q.shape != (chain.dof,):
            raise ValueError(f"{label} configuration has shape {q.shape}, expected ({chain.dof},)")
        if not state_valid(chain, q, scene):
            raise EndpointInCollision(f"{label} configuration is in collision or outside joint limits")
    if np.array_equal(q_start, q_goal):
        return Path([q_start], s.check_resolution)
    if edge_valid(chain, q_start, q_goal, scene, s.check_resolution):
        return Path([q_start, q_goal], s.check_resolution).densified()

    rng = np.random.default_rng(s.rng_seed)
    lo, hi = chain.joint_limits[:, 0], chain.joint_limits[:, 1]
    a, b = _Tree(q_start, chain.dof), _Tree(q_goal, chain.dof)
    a_is_start = True
    for _ in range(s.max_iterations):
        q_rand = rng.uniform(lo, hi)
        status, i = _extend(a, q_rand, chain, scene, s)
        if status != "trapped":
            q_new = a.nodes[i].copy()
            status_b, j = _connect(b, q_new, chain, scene, s)
            if status_b == "reached":
                from_a, from_b = a.branch(i), b.branch(j)
                if a_is_start:
                    pts = from_a[::-1] + from_b[1:]
                else:
                    pts = from_b[::-1] + from_a[1:]
                pts[0], pts[-1] = q_start, q_goal
                return Path(pts, s.check_resolution).densified()
        a, b = b, a
        a_is_start = not a_is_start
    start_tree, goal_tree = (a, b) if a_is_start else (b, a)
    raise PlanningFailed(s.max_iterations, start_tree.size, goal_tree.size)


def shortcut(path: Path, chain, scene: Scene, attempts=100, rng_seed=0) -> Path:
    """Random-pair shortcutting; the result stays valid and is never longer."""
    pts = [w.copy() for w in path.waypoints]
    if len(pts) < 3:
        return Path(pts, path.check_resolution)
    rng = np.random.default_rng(rng_seed)
    for _ in range(attempts):
        if len(pts) < 3:
            break
        i, j = sorted(rng.choice(len(pts), size=2, replace=False))
        if j - i < 2:
            continue
        direct = float(np.linalg.norm(pts[j] - pts[i]))
        along = float(np.sum(np.linalg.norm(np.diff(np.array(pts[i:j + 1]), axis=0), axis=1)))
        if direct >= along:
            continue
        if edge_valid(chain, pts[i], pts[j], scene, path.check_resolution):
            pts = pts[:i + 1] + pts[j:]
    return Path(pts, path.check_resolution).densified()


# --- torque verification -----------------------------------------------------

@dataclass
class PathTorqueReport:
    states: np.ndarray       # (m, n) densified joint states
    velocities: np.ndarray   # (m, n)
    accelerations: np.ndarray
    torques: np.ndarray      # (m, n)
    limits: np.ndarray       # (n,)
    times: np.ndarray        # (m,) time stamp of each state
    max_abs: np.ndarray = field(init=False)

    def __post_init__(self):
        self.max_abs = np.max(np.abs(self.torques), axis=0)

    @property
    def margins(self):
        return self.limits - self.max_abs

    @property
    def ok(self):
        return bool(np.all(self.max_abs <= self.limits))

    def violations(self):
        return [(int(k), int(i), float(abs(self.torques[k, i])), float(self.limits[i]))
                for k, i in zip(*np.nonzero(np.abs(self.torques) > self.limits))]


def _trapezoid(v, a, s):
    """Path speed, acceleration and time at normalized arc position ``s`` (rest to rest).

    ``v`` and ``a`` are the speed and acceleration caps in units of the
    segment per second.
    """
    s_ramp = min(0.5, v * v / (2 * a))
    v_peak = np.sqrt(2 * a * s_ramp)
    t_ramp = v_peak / a
    t_cruise = (1 - 2 * s_ramp) / v_peak
    if s < s_ramp:
        sd = np.sqrt(2 * a * s)
        return sd, a, sd / a
    if s <= 1 - s_ramp:
        # at the cruise/decel boundary with no cruise phase, report the deceleration
        acc = -a if s_ramp == 0.5 else 0.0
        return v_peak, acc, t_ramp + (s - s_ramp) / v_peak
    r = 1 - s
    sd = np.sqrt(2 * a * r)
    return sd, -a, t_ramp + t_cruise + (v_peak - sd) / a


def verify_path_torques(chain, path: Path, velocity_limits=None, acceleration_limits=None,
                        payload: Optional[Payload] = None, resolution=None) -> PathTorqueReport:
    """Torques along a path timed by per-segment trapezoidal profiles.

    Collinear waypoints are merged first; each remaining segment is traversed rest to rest along
    a straight line, as fast as the per-joint velocity and acceleration caps
    allow.  Velocity caps default to the actuator speed limits and
    acceleration caps to the speed reached in :data:`DEFAULT_RAMP_TIME`.
    """
    vmax = chain.velocity_limits if velocity_limits is None else np.asarray(velocity_limits, float)
    amax = vmax / DEFAULT_RAMP_TIME if acceleration_limits is None else np.asarray(acceleration_limits, float)
    res = resolution or path.check_resolution
    qs, qds, qdds, ts = [], [], [], []
    t0 = 0.0
    wps = path.simplified().waypoints
    if len(wps) == 1:
        qs, qds, qdds, ts = [wps[0]], [np.zeros(chain.dof)], [np.zeros(chain.dof)], [0.0]
    for k, (a_q, b_q) in enumerate(zip(wps, wps[1:])):
        d = b_q - a_q
        moving = np.abs(d) > 0
        if not moving.any():
            continue
        v = float(np.min(vmax[moving] / np.abs(d[moving])))
        acc = float(np.min(amax[moving] / np.abs(d[moving])))
        states = densify(a_q, b_q, res)
        ss = np.linspace(0.0, 1.0, len(states))
        start = 0 if not qs else 1
        t_end = _trapezoid(v, acc, 1.0)[2]
        for q, s in zip(states[start:], ss[start:]):
            sd, sdd, t = _trapezoid(v, acc, s)
            qs.append(q)
            qds.append(d * sd)
            qdds.append(d * sdd)
            ts.append(t0 + t)
        t0 += t_end
    if not qs:
        qs, qds, qdds, ts = [wps[0]], [np.zeros(chain.dof)], [np.zeros(chain.dof)], [0.0]
    tau = np.array([inverse_dynamics(chain, q, qd, qdd, payload=payload)
                    for q, qd, qdd in zip(qs, qds, qdds)])
    return PathTorqueReport(np.array(qs), np.array(qds), np.array(qdds), tau,
                            np.asarray(chain.effort_limits, float), np.array(ts))
