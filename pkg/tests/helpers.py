import os

import numpy as np

from modsynth.collision import Primitive, capsule_between
from modsynth.composition import AssemblyInfeasible, Body, Composition, Genome, KinematicChain, build_chain, decode
from modsynth.library import default_library
from modsynth.synthesis import GaSettings, gene_alphabets, random_genome
from modsynth.transforms import make_transform, rpy_to_matrix

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(ROOT, "fixtures")


def fixture(name):
    return os.path.join(FIXTURES, name)


def random_composition(rng, conventional=False, base=None):
    alphabets = gene_alphabets(GaSettings(conventional=conventional))
    while True:
        c = decode(Genome.from_array(random_genome(rng, alphabets)), repair=True, conventional=conventional)
        if not isinstance(c, AssemblyInfeasible):
            return c if base is None else Composition(c.units, base)


def random_pose(rng, spread=0.5):
    return make_transform(rpy_to_matrix(*rng.uniform(-np.pi, np.pi, 3)), rng.uniform(-spread, spread, 3))


def random_chain(rng, with_base=True, library=None):
    base = random_pose(rng) if with_base else np.eye(4)
    comp = random_composition(rng, base=base)
    return build_chain(comp, library or default_library()), comp


def random_q(rng, chain):
    return rng.uniform(chain.joint_limits[:, 0], chain.joint_limits[:, 1])


def planar_arm(lengths=(0.25, 0.2, 0.15), radius=0.02, mass=0.3):
    """Vertical-axis planar arm in the z = 0 plane with links along local x."""
    n = len(lengths)
    pre = np.array([np.eye(4)] + [make_transform(None, [L, 0, 0]) for L in lengths[:-1]])
    bodies = []
    for L in lengths:
        shape = capsule_between([0.0, 0, 0], [L, 0, 0], radius)
        I = np.diag([1e-5, mass * L * L / 12, mass * L * L / 12])
        bodies.append(Body([shape], mass, np.array([L / 2, 0, 0]), I))
    return KinematicChain(pre, bodies, [(-np.pi, np.pi)] * n, [12.0] * n, [1.2776] * n,
                          ee_offset=make_transform(None, [lengths[-1], 0, 0]))


def pendulum(m, L, gravity_axis_horizontal=True):
    """One joint with axis along world y and a point mass hanging straight down at q = 0."""
    pre = make_transform(rpy_to_matrix(-np.pi / 2, 0, 0) if gravity_axis_horizontal else np.eye(3), None)
    body = Body([Primitive("sphere", (0.01,))], m, np.array([0.0, L, 0.0]), np.zeros((3, 3)))
    return KinematicChain(pre[None], [body], [(-np.pi, np.pi)], [12.0], [1.0])
