"""URDF export of a kinematic chain, and a reader that rebuilds the chain.

The writer is deterministic: numbers are printed with 12 significant digits
and element order follows the chain, so the same composition always gives the
same bytes.  URDF has no capsule, so each capsule is written as a cylinder
plus two end spheres sharing a name prefix; the reader merges them back.
"""
import xml.etree.ElementTree as ET

import numpy as np

from .collision import Primitive
from .composition import Body, KinematicChain
from .transforms import make_transform, matrix_to_rpy, rpy_to_matrix


def fmt(x):
    # sub-picometre residue from rotations is written as an exact zero
    x = float(x)
    s = format(0.0 if abs(x) < 1e-12 else x, ".12g")
    return "0" if s == "-0" else s


def _vec(v):
    return " ".join(fmt(x) for x in v)


def _rpy(R):
    # -pi and pi name the same angle; always print pi
    return [np.pi if a < -np.pi + 1e-12 else a for a in matrix_to_rpy(R)]


def _origin(T):
    return f'<origin xyz="{_vec(T[:3, 3])}" rpy="{_vec(_rpy(T[:3, :3]))}"/>'


def _rounded(T):
    xyz = [float(fmt(x)) for x in T[:3, 3]]
    rpy = [float(fmt(x)) for x in _rpy(T[:3, :3])]
    return make_transform(rpy_to_matrix(*rpy), xyz)


def _geometry(kind, dims):
    if kind == "box":
        return f'<box size="{_vec(2 * np.asarray(dims))}"/>'
    if kind == "sphere":
        return f'<sphere radius="{fmt(dims[0])}"/>'
    return f'<cylinder radius="{fmt(dims[0])}" length="{fmt(dims[1])}"/>'


def _lowered(shape: Primitive, tag):
    """(name, kind, dims, pose) tuples for one primitive."""
    if shape.kind != "capsule":
        return [(tag, shape.kind, shape.dims, shape.pose)]
    r, length = shape.dims
    # end spheres follow the cylinder as it will be read back (rounded origin),
    # so a parsed file re-emits to the same bytes
    pose = _rounded(shape.pose)
    a, b = Primitive("capsule", shape.dims, pose).segment()
    ends = []
    for i, p in enumerate((a, b)):
        T = np.eye(4)
        T[:3, 3] = p
        ends.append((f"{tag}_end{i}", "sphere", (r,), T))
    return [(f"{tag}_cyl", "cylinder", (r, length), pose)] + ends


def _link_xml(name, body: Body, T=None):
    T = np.eye(4) if T is None else T
    R = T[:3, :3]
    lines = [f'  <link name="{name}">']
    if body is not None and body.mass > 0:
        com = R @ body.com + T[:3, 3]
        I = R @ body.inertia @ R.T
        lines += [
            "    <inertial>",
            f'      <origin xyz="{_vec(com)}" rpy="0 0 0"/>',
            f'      <mass value="{fmt(body.mass)}"/>',
            f'      <inertia ixx="{fmt(I[0, 0])}" ixy="{fmt(I[0, 1])}" ixz="{fmt(I[0, 2])}" '
            f'iyy="{fmt(I[1, 1])}" iyz="{fmt(I[1, 2])}" izz="{fmt(I[2, 2])}"/>',
            "    </inertial>",
        ]
    if body is not None:
        for i, shape in enumerate(body.shapes):
            for tag, kind, dims, pose in _lowered(shape.moved(T), f"s{i}"):
                for element in ("visual", "collision"):
                    lines += [
                        f'    <{element} name="{tag}">',
                        f"      {_origin(pose)}",
                        f"      <geometry>{_geometry(kind, dims)}</geometry>",
                        f"    </{element}>",
                    ]
    lines.append("  </link>")
    return lines


def emit_urdf(chain: KinematicChain, name="modular_robot") -> str:
    """URDF text for ``chain``; the base link is the world frame."""
    n = chain.dof
    links = ["base_link"] + [f"link_{k + 1}" for k in range(n)]
    out = ['<?xml version="1.0"?>', f'<robot name="{name}">']
    out += _link_xml("base_link", chain.base_body, chain.base)
    for k in range(n):
        T = chain.base @ chain.pre[0] if k == 0 else chain.pre[k]
        lo, hi = chain.joint_limits[k]
        out += [
            f'  <joint name="{chain.names[k]}" type="revolute">',
            f'    <parent link="{links[k]}"/>',
            f'    <child link="{links[k + 1]}"/>',
            f"    {_origin(T)}",
            '    <axis xyz="0 0 1"/>',
            f'    <limit lower="{fmt(lo)}" upper="{fmt(hi)}" effort="{fmt(chain.effort_limits[k])}" '
            f'velocity="{fmt(chain.velocity_limits[k])}"/>',
            "  </joint>",
        ]
        out += _link_xml(links[k + 1], chain.bodies[k])
    out += [
        '  <joint name="tool_joint" type="fixed">',
        f'    <parent link="{links[-1]}"/>',
        '    <child link="tool"/>',
        f"    {_origin(chain.ee_offset)}",
        "  </joint>",
        '  <link name="tool"/>',
        "</robot>",
    ]
    return "\n".join(out) + "\n"


def _floats(s):
    return [float(x) for x in s.split()]


def _parse_origin(el):
    o = el.find("origin")
    if o is None:
        return np.eye(4)
    xyz = _floats(o.get("xyz", "0 0 0"))
    rpy = _floats(o.get("rpy", "0 0 0"))
    return make_transform(rpy_to_matrix(*rpy), xyz)


def _parse_body(link) -> Body:
    mass, com, inertia = 0.0, np.zeros(3), np.zeros((3, 3))
    inertial = link.find("inertial")
    if inertial is not None:
        mass = float(inertial.find("mass").get("value"))
        T = _parse_origin(inertial)
        com = T[:3, 3]
        i = {k: float(v) for k, v in inertial.find("inertia").attrib.items()}
        I = np.array([[i["ixx"], i["ixy"], i["ixz"]],
                      [i["ixy"], i["iyy"], i["iyz"]],
                      [i["ixz"], i["iyz"], i["izz"]]])
        inertia = T[:3, :3] @ I @ T[:3, :3].T
    shapes = []
    for c in link.findall("collision"):
        tag = c.get("name", "")
        pose = _parse_origin(c)
        g = c.find("geometry")[0]
        if tag.endswith(("_end0", "_end1")):
            continue
        if tag.endswith("_cyl"):
            shapes.append(Primitive("capsule", (float(g.get("radius")), float(g.get("length"))), pose))
        elif g.tag == "box":
            shapes.append(Primitive("box", tuple(0.5 * x for x in _floats(g.get("size"))), pose))
        elif g.tag == "sphere":
            shapes.append(Primitive("sphere", (float(g.get("radius")),), pose))
        elif g.tag == "cylinder":
            shapes.append(Primitive("cylinder", (float(g.get("radius")), float(g.get("length"))), pose))
        else:
            raise ValueError(f"unsupported geometry {g.tag!r}")
    return Body(shapes, mass, com, inertia)


def parse_urdf(text) -> KinematicChain:
    """Rebuild a serial chain from URDF text written by :func:`emit_urdf`."""
    root = ET.fromstring(text)
    links = {l.get("name"): l for l in root.findall("link")}
    children = {}
    for j in root.findall("joint"):
        children[j.find("parent").get("link")] = j
    parents = {j.find("child").get("link") for j in root.findall("joint")}
    roots = [name for name in links if name not in parents]
    if len(roots) != 1:
        raise ValueError(f"expected one root link, found {roots}")
    current = roots[0]
    base_body = _parse_body(links[current])
    pre, bodies, limits, effort, velocity, names = [], [], [], [], [], []
    ee = np.eye(4)
    while current in children:
        j = children[current]
        child = j.find("child").get("link")
        if j.get("type") == "fixed":
            ee = _parse_origin(j)
            if child in children:
                raise ValueError("fixed joints are only supported at the tool")
            break
        if j.get("type") != "revolute":
            raise ValueError(f"unsupported joint type {j.get('type')!r}")
        axis = _floats(j.find("axis").get("xyz")) if j.find("axis") is not None else [1.0, 0.0, 0.0]
        if axis != [0.0, 0.0, 1.0]:
            raise ValueError("joint axes must be local z")
        lim = j.find("limit")
        pre.append(_parse_origin(j))
        limits.append((float(lim.get("lower")), float(lim.get("upper"))))
        effort.append(float(lim.get("effort")))
        velocity.append(float(lim.get("velocity")))
        names.append(j.get("name"))
        bodies.append(_parse_body(links[child]))
        current = child
    if not pre:
        raise ValueError("no revolute joints found")
    return KinematicChain(np.array(pre), bodies, np.array(limits), np.array(effort), np.array(velocity),
                          ee_offset=ee, base=np.eye(4), base_body=base_body, names=tuple(names))


def write_urdf(path, chain, name="modular_robot"):
    with open(path, "w") as fh:
        fh.write(emit_urdf(chain, name))
