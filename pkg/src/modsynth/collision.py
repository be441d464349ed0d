"""Primitive shapes, signed minimum distances and chain clearance queries.

Sphere, capsule and box pairs with at least one round shape are handled in
closed form.  Every other pair (box-box, anything with a cylinder) goes
through GJK on support functions; its distance tolerance is ``GJK_TOL``.
When GJK finds an overlap the depth is estimated by minimising the support
function of the Minkowski difference over directions, so negative values
from that path are approximate.
"""
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._geomcore import segment_box_local

from .kinematics import forward_kinematics

KINDS = ("box", "sphere", "cylinder", "capsule")
GJK_TOL = 1e-6


@dataclass
class Primitive:
    """A convex primitive posed by a 4x4 transform.

    ``dims`` is ``(hx, hy, hz)`` half-extents for a box, ``(r,)`` for a sphere
    and ``(r, length)`` for cylinders and capsules, whose axis is local z and
    whose centre is the pose origin.
    """

    kind: str
    dims: tuple
    pose: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown primitive kind {self.kind!r}")
        expected = {"box": 3, "sphere": 1, "cylinder": 2, "capsule": 2}[self.kind]
        self.dims = tuple(float(x) for x in self.dims)
        if len(self.dims) != expected:
            raise ValueError(f"{self.kind} needs {expected} dimensions, got {len(self.dims)}")
        if not all(x > 0 for x in self.dims):
            raise ValueError(f"{self.kind} dimensions must be positive: {self.dims}")
        self.pose = np.asarray(self.pose, dtype=float)

    @property
    def center(self):
        return self.pose[:3, 3]

    @property
    def radius(self):
        return self.dims[0]

    def moved(self, T):
        return Primitive(self.kind, self.dims, T @ self.pose)

    def segment(self):
        """World endpoints of the axis of a capsule or cylinder."""
        half = 0.5 * self.dims[1] * self.pose[:3, 2]
        return self.center - half, self.center + half

    def bounding_radius(self):
        if self.kind == "box":
            return float(np.linalg.norm(self.dims))
        if self.kind == "sphere":
            return self.dims[0]
        if self.kind == "capsule":
            return self.dims[0] + 0.5 * self.dims[1]
        return math.hypot(self.dims[0], 0.5 * self.dims[1])

    def support(self, d):
        """Farthest point of the shape in world direction ``d``."""
        R = self.pose[:3, :3]
        dl = R.T @ d
        k = self.kind
        if k == "box":
            local = np.where(dl >= 0, 1.0, -1.0) * np.asarray(self.dims)
        elif k == "sphere":
            n = np.linalg.norm(dl)
            local = dl * (self.dims[0] / n) if n > 0 else np.array([self.dims[0], 0.0, 0.0])
        elif k == "capsule":
            r, length = self.dims
            n = np.linalg.norm(dl)
            local = np.array([0.0, 0.0, 0.5 * length if dl[2] >= 0 else -0.5 * length])
            if n > 0:
                local = local + dl * (r / n)
        else:
            r, length = self.dims
            radial = math.hypot(dl[0], dl[1])
            local = np.array([0.0, 0.0, 0.5 * length if dl[2] >= 0 else -0.5 * length])
            if radial > 0:
                local[0] = r * dl[0] / radial
                local[1] = r * dl[1] / radial
        return R @ local + self.center

    def to_dict(self):
        return {"kind": self.kind, "dims": list(self.dims), "pose": self.pose.tolist()}


def capsule_between(a, b, radius):
    """Capsule whose axis runs from point ``a`` to point ``b``."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    axis = b - a
    length = float(np.linalg.norm(axis))
    T = np.eye(4)
    T[:3, 3] = 0.5 * (a + b)
    T[:3, :3] = _frame_with_z(axis / length)
    return Primitive("capsule", (radius, length), T)


def _frame_with_z(z):
    helper = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = np.cross(helper, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


@dataclass
class Obstacle:
    name: str
    shape: Primitive
    meta: dict = field(default=None, compare=False, repr=False)  # file fields it was read from


@dataclass
class Scene:
    obstacles: list = field(default_factory=list)
    safety_margin: float = 0.01

    def __post_init__(self):
        if self.safety_margin < 0:
            raise ValueError("safety margin must be non-negative")
        names = [o.name for o in self.obstacles]
        if len(set(names)) != len(names):
            raise ValueError("obstacle names must be unique")

    def __len__(self):
        return len(self.obstacles)


# --- closed-form distances --------------------------------------------------

def point_segment_distance(p, a, b):
    d = b - a
    dd = float(d @ d)
    t = 0.0 if dd == 0 else min(1.0, max(0.0, float((p - a) @ d) / dd))
    return float(np.linalg.norm(p - (a + t * d)))


def segment_segment_distance(p1, q1, p2, q2):
    """Closest distance between segments ``p1q1`` and ``p2q2``."""
    d1, d2, r = q1 - p1, q2 - p2, p1 - p2
    a, e, f = float(d1 @ d1), float(d2 @ d2), float(d2 @ r)
    eps = 1e-18
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s, t = 0.0, min(1.0, max(0.0, f / e))
    else:
        c = float(d1 @ r)
        if e <= eps:
            t, s = 0.0, min(1.0, max(0.0, -c / a))
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = min(1.0, max(0.0, (b * f - c * e) / denom)) if denom > eps * a * e else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t, s = 0.0, min(1.0, max(0.0, -c / a))
            elif t > 1.0:
                t, s = 1.0, min(1.0, max(0.0, (b - c) / a))
    return float(np.linalg.norm((p1 + s * d1) - (p2 + t * d2)))


def box_sdf(box: Primitive, x):
    """Signed distance from a world point to a box surface."""
    local = box.pose[:3, :3].T @ (x - box.center)
    q = np.abs(local) - np.asarray(box.dims)
    outside = np.linalg.norm(np.maximum(q, 0.0))
    return float(outside + min(q.max(), 0.0))


def segment_box_sdf(a, b, box: Primitive):
    """Exact minimum of the box signed distance over the segment ``ab``.

    The signed distance is convex along the segment: piecewise quadratic
    (squared) outside the box and piecewise linear inside.  All kinks and
    piecewise minima are enumerated as candidate parameters.
    """
    R = box.pose[:3, :3]
    p0 = R.T @ (a - box.center)
    d = R.T @ (b - a)
    return segment_box_local(p0, d, np.asarray(box.dims, dtype=float))


def _analytic(a: Primitive, b: Primitive):
    ka, kb = a.kind, b.kind
    if ka == "sphere" and kb == "sphere":
        return float(np.linalg.norm(a.center - b.center)) - a.radius - b.radius
    if ka == "sphere" and kb == "capsule":
        return point_segment_distance(a.center, *b.segment()) - a.radius - b.radius
    if ka == "capsule" and kb == "capsule":
        return segment_segment_distance(*a.segment(), *b.segment()) - a.radius - b.radius
    if ka == "sphere" and kb == "box":
        return box_sdf(b, a.center) - a.radius
    if ka == "capsule" and kb == "box":
        return segment_box_sdf(*a.segment(), b) - a.radius
    return None


def distance(a: Primitive, b: Primitive) -> float:
    """Signed minimum distance between two primitives (negative on overlap)."""
    order = {"sphere": 0, "capsule": 1, "box": 2, "cylinder": 3}
    if order[a.kind] > order[b.kind]:
        a, b = b, a
    elif a.kind == b.kind and _canonical_key(a) > _canonical_key(b):
        # identical kinds: fix the argument order so the result is exactly symmetric
        a, b = b, a
    d = _analytic(a, b)
    if d is not None:
        return d
    return gjk_distance(a, b)


def _canonical_key(p):
    return (p.dims, tuple(p.pose.ravel()))


# --- GJK --------------------------------------------------------------------

def _closest_on_simplex(pts):
    """Closest point to the origin on the convex hull of up to 4 points.

    Returns the point and the indices of the supporting sub-simplex.
    """
    best, best_idx = None, None
    n = len(pts)
    for size in range(1, n + 1):
        for idx in itertools.combinations(range(n), size):
            P = np.array([pts[i] for i in idx])
            if size == 1:
                x, lam = P[0], np.array([1.0])
            else:
                E = (P[1:] - P[0]).T
                G = E.T @ E
                try:
                    mu = np.linalg.solve(G, -E.T @ P[0])
                except np.linalg.LinAlgError:
                    continue
                lam = np.concatenate([[1.0 - mu.sum()], mu])
                if (lam < -1e-12).any():
                    continue
                x = P[0] + E @ mu
            nx = float(x @ x)
            if best is None or nx < best[0] - 1e-18:
                best, best_idx = (nx, x), idx
    return best[1], best_idx


def gjk_distance(a: Primitive, b: Primitive, tol=1e-12, max_iter=200):
    def support(d):
        return a.support(d) - b.support(-d)

    v = a.center - b.center
    if not v.any():
        v = np.array([1.0, 0.0, 0.0])
    simplex = [support(-v)]
    v = simplex[0]
    for _ in range(max_iter):
        vv = float(v @ v)
        if vv <= 1e-20:
            return -_penetration_depth(support)
        w = support(-v)
        if vv - float(v @ w) <= tol * max(1.0, vv) or any(np.array_equal(w, s) for s in simplex):
            break
        simplex.append(w)
        v, idx = _closest_on_simplex(simplex)
        simplex = [simplex[i] for i in idx]
        if len(simplex) == 4:
            # origin enclosed by a tetrahedron
            return -_penetration_depth(support)
    return math.sqrt(float(v @ v))


_DIRS = None


def _sphere_directions(n=256):
    global _DIRS
    if _DIRS is None:
        i = np.arange(n) + 0.5
        phi = np.arccos(1 - 2 * i / n)
        theta = math.pi * (1 + 5 ** 0.5) * i
        fib = np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
        _DIRS = np.vstack([np.eye(3), -np.eye(3), fib])
    return _DIRS


def _penetration_depth(support):
    # depth = min over unit d of the Minkowski-difference support value
    dirs = _sphere_directions()
    vals = np.array([support(d) @ d for d in dirs])
    k = int(np.argmin(vals))
    d, best = dirs[k], vals[k]
    step = 0.2
    while step > 1e-4:
        improved = False
        for e in np.eye(3):
            for s in (step, -step):
                nd = d + s * e
                nd /= np.linalg.norm(nd)
                val = float(support(nd) @ nd)
                if val < best:
                    d, best, improved = nd, val, True
        if not improved:
            step *= 0.5
    return max(best, 0.0)


# --- chain queries ----------------------------------------------------------

@dataclass
class Clearance:
    distance: float
    pair: Optional[tuple] = None  # e.g. (("body", 2), ("obstacle", "box3"))


def posed_shapes(chain, q):
    """World-frame shapes per body; index 0 is the fixed base, k the k-th moving body."""
    poses, _ = forward_kinematics(chain, q)
    out = [[s.moved(chain.base) for s in chain.base_body.shapes]]
    for T, body in zip(poses, chain.bodies):
        out.append([s.moved(T) for s in body.shapes])
    return out


def _bounds(shapes):
    return [(s.center, s.bounding_radius()) for s in shapes]


def chain_clearance(chain, q, scene: Scene) -> Clearance:
    """Minimum distance between bodies and obstacles and between non-adjacent bodies."""
    bodies = posed_shapes(chain, q)
    best = Clearance(math.inf)

    def consider(shapes_a, shapes_b, label):
        for sa in shapes_a:
            ca, ra = sa.center, sa.bounding_radius()
            for sb in shapes_b:
                lower = float(np.linalg.norm(ca - sb.center)) - ra - sb.bounding_radius()
                if lower >= best.distance:
                    continue
                dist = distance(sa, sb)
                if dist < best.distance:
                    best.distance, best.pair = dist, label

    for k, shapes in enumerate(bodies):
        for ob in scene.obstacles:
            consider(shapes, [ob.shape], (("body", k), ("obstacle", ob.name)))
    for i in range(len(bodies)):
        for j in range(i + 2, len(bodies)):
            consider(bodies[i], bodies[j], (("body", i), ("body", j)))
    return best


def collision_constraint(chain, q, scene: Scene) -> float:
    """``max(0, safety_margin - clearance)``; zero means the pose is collision-free."""
    return max(0.0, scene.safety_margin - chain_clearance(chain, q, scene).distance)


def is_collision_free(chain, q, scene: Scene) -> bool:
    """Same verdict as ``collision_constraint(...) == 0`` with early exit.

    Pairs whose bounding spheres are already farther apart than the safety
    margin are skipped, and the scan stops at the first violating pair.
    """
    bodies = posed_shapes(chain, q)
    margin = scene.safety_margin
    bounds = [_bounds(shapes) for shapes in bodies]

    def clash(shapes_a, bounds_a, shapes_b, bounds_b):
        for sa, (ca, ra) in zip(shapes_a, bounds_a):
            for sb, (cb, rb) in zip(shapes_b, bounds_b):
                if float(np.linalg.norm(ca - cb)) - ra - rb >= margin:
                    continue
                if distance(sa, sb) < margin:
                    return True
        return False

    for ob in scene.obstacles:
        ob_b = _bounds([ob.shape])
        for shapes, b in zip(bodies, bounds):
            if clash(shapes, b, [ob.shape], ob_b):
                return False
    for i in range(len(bodies)):
        for j in range(i + 2, len(bodies)):
            if clash(bodies[i], bounds[i], bodies[j], bounds[j]):
                return False
    return True
