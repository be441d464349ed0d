"""Genomes, compositions and their lowering to kinematic chains.

Frame convention for one modular unit, starting at the attaching frame of the
previous joint (or the world base for the first unit)::

    R_x(skew) . T_z(twist_unit_offset) . R_y(alpha) . T_z(body_length)

``skew`` is 0 for input port Ip1 (kinds 1, 3) and 90 deg for Ip2 (kinds 2, 4),
``alpha`` the intersecting twist.  The result is the joint frame, which then
rotates about its own z axis.  A link carried by a kind 3/4 unit hangs off the
moving joint frame as ``T_z(length) . R_x(90 deg) . R_y(bend)`` and is folded
into the next unit's fixed transform (or the end-effector offset for the last
unit).
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .collision import capsule_between
from .library import (
    LINK_NAMES, MAX_DOF, MIN_DOF, TWIST_LATTICE, UNIT_KINDS, VARIANTS,
    LibraryConfig, ModularUnit, ValidationReport, validate_assembly,
)
from .transforms import rot_x, rot_y, trans_z

# genome layout: [dof, (variant, kind, twist, link) x 6]
SEGMENT_GENES = 4
GENOME_LENGTH = 1 + SEGMENT_GENES * MAX_DOF
ZERO_TWIST_GENE = TWIST_LATTICE.index(0)


@dataclass(frozen=True)
class Genome:
    genes: tuple

    def __post_init__(self):
        object.__setattr__(self, "genes", tuple(int(g) for g in self.genes))
        if len(self.genes) != GENOME_LENGTH:
            raise ValueError(f"genome must have {GENOME_LENGTH} genes")

    @classmethod
    def from_array(cls, a):
        return cls(tuple(int(x) for x in a))

    def to_array(self):
        return np.array(self.genes, dtype=np.int64)

    @property
    def dof(self):
        return self.genes[0]

    def segment(self, i):
        s = 1 + SEGMENT_GENES * i
        return self.genes[s:s + SEGMENT_GENES]

    def in_alphabet(self):
        if not MIN_DOF <= self.dof <= MAX_DOF:
            return False
        for i in range(MAX_DOF):
            v, k, t, l = self.segment(i)
            if v not in (0, 1) or k not in UNIT_KINDS or not 0 <= t < len(TWIST_LATTICE) or not 0 <= l < len(LINK_NAMES):
                return False
        return True


@dataclass(frozen=True)
class Composition:
    units: tuple
    base_pose: tuple = tuple(np.eye(4).ravel())

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "base_pose", tuple(float(x) for x in np.asarray(self.base_pose).ravel()))
        if not MIN_DOF <= len(self.units) <= MAX_DOF:
            raise ValueError(f"composition needs {MIN_DOF}..{MAX_DOF} units, got {len(self.units)}")

    @property
    def dof(self):
        return len(self.units)

    @property
    def base(self):
        return np.array(self.base_pose).reshape(4, 4)

    def key(self):
        return tuple((u.variant, u.kind, u.twist, u.link) for u in self.units)

    def label(self):
        return "-".join(u.label() for u in self.units)

    def to_dict(self):
        return {"units": [u.to_dict() for u in self.units], "base_pose": np.asarray(self.base).tolist()}

    @classmethod
    def from_dict(cls, d):
        base = d.get("base_pose")
        return cls(tuple(ModularUnit.from_dict(u) for u in d["units"]),
                   np.eye(4) if base is None else np.asarray(base, dtype=float))


@dataclass(frozen=True)
class AssemblyInfeasible:
    """Decode outcome for a genome that violates the assembly rules."""

    units: tuple
    report: ValidationReport


def decode(genome: Genome, repair=True, conventional=False, library: Optional[LibraryConfig] = None):
    """Map a genome to a :class:`Composition` or an :class:`AssemblyInfeasible`.

    With ``repair`` the first unit is forced to H, any H after an L is flipped
    to L and, for more than 3 units, the last is forced to L.  Epsilon
    violations cannot be repaired and are always reported.  ``conventional``
    zeroes every intersecting twist.
    """
    if not genome.in_alphabet():
        raise ValueError("genome has genes outside their alphabets")
    n = genome.dof
    raw = []
    for i in range(n):
        v, k, t, l = genome.segment(i)
        raw.append([VARIANTS[v], k, 0 if conventional else TWIST_LATTICE[t], LINK_NAMES[l] if k in (3, 4) else None])
    if repair:
        raw[0][0] = "H"
        seen_l = False
        for r in raw:
            if r[0] == "L":
                seen_l = True
            elif seen_l:
                r[0] = "L"
        if n >= 4:
            raw[-1][0] = "L"
    units = tuple(ModularUnit(*r) for r in raw)
    report = validate_assembly(units, library)
    if not report.ok:
        return AssemblyInfeasible(units, report)
    return Composition(units)


def encode(composition: Composition) -> Genome:
    """Inverse of :func:`decode` on valid compositions; inactive segments are zero."""
    genes = [composition.dof]
    for u in composition.units:
        link = LINK_NAMES.index(u.link) if u.link is not None else 0
        genes += [VARIANTS.index(u.variant), u.kind, TWIST_LATTICE.index(u.twist), link]
    for _ in range(MAX_DOF - composition.dof):
        genes += [0, 1, 0, 0]
    return Genome(tuple(genes))


# --- chains -----------------------------------------------------------------

@dataclass
class Body:
    shapes: list
    mass: float
    com: np.ndarray
    inertia: np.ndarray  # about the centre of mass, body frame


@dataclass
class KinematicChain:
    pre: np.ndarray            # (n, 4, 4) fixed transform before each joint
    bodies: list               # n moving bodies
    joint_limits: np.ndarray   # (n, 2) rad
    effort_limits: np.ndarray  # (n,) N m
    velocity_limits: np.ndarray  # (n,) rad/s
    ee_offset: np.ndarray = field(default_factory=lambda: np.eye(4))
    base: np.ndarray = field(default_factory=lambda: np.eye(4))
    base_body: Body = None
    variants: tuple = ()
    names: tuple = ()

    def __post_init__(self):
        self.pre = np.ascontiguousarray(self.pre, dtype=float)
        self.base = np.ascontiguousarray(self.base, dtype=float)
        self.ee_offset = np.ascontiguousarray(self.ee_offset, dtype=float)
        n = len(self.pre)
        self.joint_limits = np.asarray(self.joint_limits, dtype=float).reshape(n, 2)
        self.effort_limits = np.asarray(self.effort_limits, dtype=float)
        self.velocity_limits = np.asarray(self.velocity_limits, dtype=float)
        if not (len(self.bodies) == n == len(self.effort_limits) == len(self.velocity_limits)):
            raise ValueError("joints, bodies and limit lists must have equal length")
        if self.base_body is None:
            self.base_body = Body([], 0.0, np.zeros(3), np.zeros((3, 3)))
        if not self.names:
            self.names = tuple(f"joint_{k + 1}" for k in range(n))

    @property
    def dof(self):
        return len(self.pre)

    def total_mass(self):
        return self.base_body.mass + sum(b.mass for b in self.bodies)


def _cylinder_inertia(m, r, length):
    """Solid cylinder about its centre, axis along local z."""
    ixx = m * (3 * r * r + length * length) / 12.0
    return np.diag([ixx, ixx, 0.5 * m * r * r])


class _Lump:
    """Accumulates point-mass-plus-inertia components in one body frame."""

    def __init__(self):
        self.parts = []

    def add(self, m, com, inertia_at_com):
        self.parts.append((m, np.asarray(com, float), inertia_at_com))

    def add_segment(self, m, a, b, radius):
        """Uniform solid cylinder between points ``a`` and ``b``."""
        a, b = np.asarray(a, float), np.asarray(b, float)
        axis = b - a
        length = float(np.linalg.norm(axis))
        R = capsule_between(a, b, 1.0).pose[:3, :3]
        self.add(m, 0.5 * (a + b), R @ _cylinder_inertia(m, radius, length) @ R.T)

    def total(self):
        m = sum(p[0] for p in self.parts)
        if m == 0:
            return 0.0, np.zeros(3), np.zeros((3, 3))
        c = sum(p[0] * p[1] for p in self.parts) / m
        I = np.zeros((3, 3))
        for mi, ci, Ii in self.parts:
            d = ci - c
            I += Ii + mi * (float(d @ d) * np.eye(3) - np.outer(d, d))
        return m, c, 0.5 * (I + I.T)


def unit_transform(unit: ModularUnit, library: LibraryConfig):
    """Fixed transform from a unit's input port to its joint frame, plus the pivot transform."""
    skew = 0.0 if unit.port == 1 else math.pi / 2
    offset = library.twist_unit_offset[unit.variant]
    body = library.module_body_length[unit.variant]
    to_pivot = rot_x(skew) @ trans_z(offset)
    pivot = to_pivot @ rot_y(math.radians(unit.twist))
    return pivot @ trans_z(body), to_pivot, pivot


def link_transform(link_name, library: LibraryConfig):
    link = library.link(link_name)
    return trans_z(link.length) @ rot_x(math.pi / 2) @ rot_y(math.radians(link.bend_angle))


def _link_geometry(link_name, library: LibraryConfig, lump: _Lump, shapes: list):
    link = library.link(link_name)
    r = link.radius + library.collision_padding
    L = link.length
    a, b = np.zeros(3), np.array([0.0, 0.0, L])
    if not link.curved:
        shapes.append(capsule_between(a, b, r))
        lump.add_segment(link.mass, a, b, link.radius)
        return
    # circular arc with chord L bulging toward +x, approximated by two chords
    sagitta = 0.5 * L * math.tan(abs(math.radians(link.bend_angle)) / 4.0)
    mid = np.array([math.copysign(sagitta, link.bend_angle), 0.0, 0.5 * L])
    for p, q in ((a, mid), (mid, b)):
        shapes.append(capsule_between(p, q, r))
        lump.add_segment(0.5 * link.mass, p, q, link.radius)


def _unit_geometry(unit, library: LibraryConfig, start, lump: _Lump, shapes: list, with_mass=True):
    """Twist unit and casing of ``unit`` attached at frame ``start`` (in the owning body frame)."""
    full, to_pivot, pivot = unit_transform(unit, library)
    r = library.module_body_radius[unit.variant]
    rp = r + library.collision_padding
    p0 = start[:3, 3]
    p1 = (start @ to_pivot)[:3, 3]
    p2 = (start @ full)[:3, 3]
    shapes.append(capsule_between(p0, p1, rp))
    shapes.append(capsule_between(p1, p2, rp))
    if with_mass:
        m = library.actuator(unit.variant).mass * (1.0 - library.rotor_mass_fraction)
        lump.add_segment(m, p1, p2, r)
    return start @ full


def build_chain(composition: Composition, library: LibraryConfig) -> KinematicChain:
    """Lower a composition to a serial chain with primitive geometry and lumped inertials.

    Body k rides on joint k and carries the output flange of unit k, unit k's
    link (if any) and the casing of unit k+1.  The casing of the first unit
    belongs to the fixed base.
    """
    units = composition.units
    n = len(units)
    pre = np.empty((n, 4, 4))
    bodies = []
    base_lump, base_shapes = _Lump(), []
    _unit_geometry(units[0], library, np.eye(4), base_lump, base_shapes)
    pre[0] = unit_transform(units[0], library)[0]
    ee = np.eye(4)
    for k, u in enumerate(units):
        lump, shapes = _Lump(), []
        r = library.module_body_radius[u.variant]
        rotor = library.actuator(u.variant).mass * library.rotor_mass_fraction
        flange = 0.1 * library.module_body_length[u.variant]
        lump.add_segment(rotor, [0.0, 0.0, -flange], [0.0, 0.0, 0.0], r)
        attach = np.eye(4)
        if u.link is not None:
            _link_geometry(u.link, library, lump, shapes)
            attach = link_transform(u.link, library)
        if k + 1 < n:
            joint = _unit_geometry(units[k + 1], library, attach, lump, shapes)
            pre[k + 1] = joint
        else:
            ee = attach
        m, c, I = lump.total()
        bodies.append(Body(shapes, m, c, I))
    bm, bc, bI = base_lump.total()
    lims = np.array([library.joint_limits[u.variant] for u in units])
    return KinematicChain(
        pre=pre,
        bodies=bodies,
        joint_limits=lims,
        effort_limits=np.array([library.actuator(u.variant).nominal_torque for u in units]),
        velocity_limits=np.array([library.actuator(u.variant).velocity_limit for u in units]),
        ee_offset=ee,
        base=composition.base,
        base_body=Body(base_shapes, bm, bc, bI),
        variants=tuple(u.variant for u in units),
    )


def max_reach(chain: KinematicChain):
    """Upper bound on the distance from the first joint to the end-effector."""
    total = sum(float(np.linalg.norm(T[:3, 3])) for T in chain.pre[1:])
    return total + float(np.linalg.norm(chain.ee_offset[:3, 3]))
