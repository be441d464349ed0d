"""Modular library catalog: actuators, links, modular units and assembly rules."""
import json
import math
import os
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from types import MappingProxyType
from typing import Optional

VARIANTS = ("H", "L")
UNIT_KINDS = (1, 2, 3, 4)
LINK_NAMES = ("S1", "S2", "C1", "C2")
#: intersecting-twist lattice in degrees, 15 deg resolution over [-45, 90]
TWIST_LATTICE = (-45, -30, -15, 0, 15, 30, 45, 60, 75, 90)
MIN_DOF, MAX_DOF = 2, 6

LIBRARY_ENV_VAR = "MODSYNTH_LIBRARY"


class LibraryError(ValueError):
    """Raised for malformed library config files; the message names the field."""


@dataclass(frozen=True)
class ActuatorSpec:
    variant: str
    mass: float            # kg
    rated_speed: float     # rpm
    nominal_torque: float  # N m
    max_torque: float      # N m
    epsilon: int

    def __post_init__(self):
        for name in ("mass", "rated_speed", "nominal_torque", "max_torque"):
            if not getattr(self, name) > 0:
                raise LibraryError(f"actuators.{self.variant}.{name} must be positive")
        if self.nominal_torque >= self.max_torque:
            raise LibraryError(f"actuators.{self.variant}: nominal_torque must be below max_torque")
        if int(self.epsilon) != self.epsilon or self.epsilon < 1:
            raise LibraryError(f"actuators.{self.variant}.epsilon must be an integer >= 1")

    @property
    def velocity_limit(self):
        """Rated speed converted to rad/s."""
        return self.rated_speed * 2.0 * math.pi / 60.0


@dataclass(frozen=True)
class LinkType:
    name: str
    length: float      # straight length, or chord for curved links (m)
    bend_angle: float  # deg, 0 for straight links
    mass: float        # kg
    radius: float = 0.025

    def __post_init__(self):
        for attr in ("length", "mass", "radius"):
            if not getattr(self, attr) > 0:
                raise LibraryError(f"links.{self.name}.{attr} must be positive")
        if self.name.startswith("S") and self.bend_angle != 0:
            raise LibraryError(f"links.{self.name}.bend_angle must be 0 for a straight link")
        if self.name.startswith("C") and self.bend_angle == 0:
            raise LibraryError(f"links.{self.name}.bend_angle must be non-zero for a curved link")

    @property
    def curved(self):
        return self.bend_angle != 0


@dataclass(frozen=True)
class ModularUnit:
    """One joint module in a composition, e.g. ``H^4(-45 deg)`` with an S2 link."""

    variant: str
    kind: int
    twist: int = 0              # intersecting twist, degrees on TWIST_LATTICE
    link: Optional[str] = None  # present iff kind in {3, 4}

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.kind not in UNIT_KINDS:
            raise ValueError(f"unit kind must be one of {UNIT_KINDS}, got {self.kind!r}")
        if self.twist not in TWIST_LATTICE:
            raise ValueError(f"twist {self.twist!r} deg is not on the 15 deg lattice")
        if (self.kind in (3, 4)) != (self.link is not None):
            raise ValueError(f"unit kind {self.kind} {'requires' if self.kind in (3, 4) else 'forbids'} a link")
        if self.link is not None and self.link not in LINK_NAMES:
            raise ValueError(f"unknown link type {self.link!r}")

    @property
    def port(self):
        """Input port used: 1 for kinds 1 and 3, 2 for kinds 2 and 4."""
        return 1 if self.kind in (1, 3) else 2

    def label(self):
        s = f"{self.variant}{self.kind}"
        if self.twist:
            s += f"({self.twist})"
        if self.link:
            s += f"[{self.link}]"
        return s

    def to_dict(self):
        return {"variant": self.variant, "kind": self.kind, "twist": self.twist, "link": self.link}

    @classmethod
    def from_dict(cls, d):
        return cls(d["variant"], int(d["kind"]), int(d.get("twist", 0)), d.get("link"))


def _freeze(d):
    return MappingProxyType(dict(d))


@dataclass(frozen=True)
class LibraryConfig:
    actuators: MappingProxyType
    links: MappingProxyType
    module_body_length: MappingProxyType
    module_body_radius: MappingProxyType
    twist_unit_offset: MappingProxyType
    joint_limits: MappingProxyType = field(
        default_factory=lambda: _freeze({v: (-math.pi, math.pi) for v in VARIANTS}))
    collision_padding: float = 0.005
    # share of actuator mass carried by the rotating output flange
    rotor_mass_fraction: float = 0.1
    source: Optional[str] = None

    def actuator(self, variant) -> ActuatorSpec:
        return self.actuators[variant]

    def link(self, name) -> LinkType:
        try:
            return self.links[name]
        except KeyError:
            raise LibraryError(f"library has no link type {name!r}") from None

    def __reduce__(self):
        # MappingProxyType does not pickle; needed for process-pool evaluation
        state = {f: getattr(self, f) for f in self.__dataclass_fields__}
        return (_rebuild_library, ({k: dict(v) if isinstance(v, MappingProxyType) else v
                                    for k, v in state.items()},))

    def to_dict(self):
        return {
            "format_version": 1,
            "actuators": {
                v: {"mass": a.mass, "rated_speed": a.rated_speed, "nominal_torque": a.nominal_torque,
                    "max_torque": a.max_torque, "epsilon": a.epsilon}
                for v, a in self.actuators.items()
            },
            "links": {
                n: {"length": l.length, "bend_angle": l.bend_angle, "mass": l.mass, "radius": l.radius}
                for n, l in self.links.items()
            },
            "geometry": {
                "module_body_length": dict(self.module_body_length),
                "module_body_radius": dict(self.module_body_radius),
                "twist_unit_offset": dict(self.twist_unit_offset),
                "collision_padding": self.collision_padding,
                "rotor_mass_fraction": self.rotor_mass_fraction,
                "joint_limits": {v: [math.degrees(lo), math.degrees(hi)] for v, (lo, hi) in self.joint_limits.items()},
            },
        }


def _rebuild_library(state):
    return LibraryConfig(**{k: _freeze(v) if isinstance(v, dict) else v for k, v in state.items()})


# shipped geometry defaults, used when a config file omits them
DEFAULT_GEOMETRY = {
    "module_body_length": {"H": 0.12, "L": 0.09},
    "module_body_radius": {"H": 0.035, "L": 0.03},
    "twist_unit_offset": {"H": 0.04, "L": 0.03},
    "collision_padding": 0.005,
    "rotor_mass_fraction": 0.1,
    "joint_limits": {"H": [-180.0, 180.0], "L": [-180.0, 180.0]},
}
DEFAULT_LINK_MASS = 0.08
DEFAULT_LINK_RADIUS = 0.025


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise LibraryError(f"{where} must be a number, got {value!r}")
    return float(value)


def _positive(value, where):
    x = _number(value, where)
    if not x > 0:
        raise LibraryError(f"{where} must be positive, got {value!r}")
    return x


def library_from_dict(d, source=None) -> LibraryConfig:
    if not isinstance(d, dict):
        raise LibraryError("library config must be a JSON object")
    for key in ("actuators", "links"):
        if key not in d:
            raise LibraryError(f"missing required key {key!r}")
    actuators = {}
    for v in VARIANTS:
        if v not in d["actuators"]:
            raise LibraryError(f"actuators.{v} is missing")
        a = d["actuators"][v]
        for k in ("mass", "rated_speed", "nominal_torque", "max_torque", "epsilon"):
            if k not in a:
                raise LibraryError(f"actuators.{v}.{k} is missing")
        actuators[v] = ActuatorSpec(
            v,
            _positive(a["mass"], f"actuators.{v}.mass"),
            _positive(a["rated_speed"], f"actuators.{v}.rated_speed"),
            _positive(a["nominal_torque"], f"actuators.{v}.nominal_torque"),
            _positive(a["max_torque"], f"actuators.{v}.max_torque"),
            int(_positive(a["epsilon"], f"actuators.{v}.epsilon")),
        )
    links = {}
    for name in LINK_NAMES:
        if name not in d["links"]:
            raise LibraryError(f"links.{name} is missing")
        l = d["links"][name]
        if "length" not in l:
            raise LibraryError(f"links.{name}.length is missing")
        links[name] = LinkType(
            name,
            _positive(l["length"], f"links.{name}.length"),
            _number(l.get("bend_angle", 0.0), f"links.{name}.bend_angle"),
            _positive(l.get("mass", DEFAULT_LINK_MASS), f"links.{name}.mass"),
            _positive(l.get("radius", DEFAULT_LINK_RADIUS), f"links.{name}.radius"),
        )
    geom = d.get("geometry", {})
    per_variant = {}
    for key in ("module_body_length", "module_body_radius", "twist_unit_offset"):
        given = geom.get(key, {})
        per_variant[key] = _freeze({
            v: _positive(given.get(v, DEFAULT_GEOMETRY[key][v]), f"geometry.{key}.{v}") for v in VARIANTS
        })
    padding = _number(geom.get("collision_padding", DEFAULT_GEOMETRY["collision_padding"]),
                      "geometry.collision_padding")
    if padding < 0:
        raise LibraryError("geometry.collision_padding must be non-negative")
    rotor = _number(geom.get("rotor_mass_fraction", DEFAULT_GEOMETRY["rotor_mass_fraction"]),
                    "geometry.rotor_mass_fraction")
    if not 0 < rotor < 1:
        raise LibraryError("geometry.rotor_mass_fraction must lie in (0, 1)")
    limits = {}
    for v in VARIANTS:
        lo, hi = geom.get("joint_limits", {}).get(v, DEFAULT_GEOMETRY["joint_limits"][v])
        lo, hi = _number(lo, f"geometry.joint_limits.{v}"), _number(hi, f"geometry.joint_limits.{v}")
        if not lo < hi:
            raise LibraryError(f"geometry.joint_limits.{v} must have lower < upper")
        limits[v] = (math.radians(lo), math.radians(hi))
    return LibraryConfig(
        actuators=_freeze(actuators),
        links=_freeze(links),
        joint_limits=_freeze(limits),
        collision_padding=padding,
        rotor_mass_fraction=rotor,
        source=source,
        **per_variant,
    )


def load_library(path=None) -> LibraryConfig:
    """Load a library config file.

    Without ``path`` the ``MODSYNTH_LIBRARY`` environment variable is consulted,
    then the shipped default catalog.
    """
    if path is None:
        path = os.environ.get(LIBRARY_ENV_VAR)
    if path is None:
        text = resources.files("modsynth").joinpath("data/library.json").read_text()
        source = "<default>"
    else:
        with open(path) as fh:
            text = fh.read()
        source = str(path)
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LibraryError(f"{source}: parse error at line {exc.lineno}: {exc.msg}") from None
    return library_from_dict(d, source=source)


@lru_cache(maxsize=None)
def default_library() -> LibraryConfig:
    return load_library(resources.files("modsynth").joinpath("data/library.json"))


def torque_limit(variant, library: Optional[LibraryConfig] = None) -> float:
    """Nominal torque of the variant's actuator, used as the joint torque limit."""
    lib = library or default_library()
    return lib.actuator(variant).nominal_torque


@dataclass(frozen=True)
class Violation:
    rule: str
    index: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple

    @property
    def rules(self):
        return {v.rule for v in self.violations}


def validate_assembly(sequence, library: Optional[LibraryConfig] = None) -> ValidationReport:
    """Check a unit sequence against the four assembly rules.

    R1 first unit is H; R2 for more than 3 units the last is L; R3 no H after an
    L; R4 per-variant count within epsilon.
    """
    n = len(sequence)
    if not MIN_DOF <= n <= MAX_DOF:
        raise ValueError(f"sequence length must be in [{MIN_DOF}, {MAX_DOF}], got {n}")
    lib = library or default_library()
    out = []
    if sequence[0].variant != "H":
        out.append(Violation("R1", 0, "first module must be the H variant"))
    if n > 3 and sequence[-1].variant != "L":
        out.append(Violation("R2", n - 1, "last module must be the L variant when DoF > 3"))
    seen_l = False
    for i, u in enumerate(sequence):
        if u.variant == "L":
            seen_l = True
        elif seen_l:
            out.append(Violation("R3", i, "H module assembled after an L module"))
    for v in VARIANTS:
        idx = [i for i, u in enumerate(sequence) if u.variant == v]
        eps = lib.actuator(v).epsilon
        if len(idx) > eps:
            out.append(Violation("R4", idx[eps], f"{len(idx)} {v} modules exceed epsilon={eps}"))
    return ValidationReport(not out, tuple(out))
