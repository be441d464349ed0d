import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from helpers import fixture, pendulum, random_chain, random_q
from modsynth.composition import Composition, build_chain
from modsynth.dynamics import (
    Payload, check_torque_limits, gravity_torque, inverse_dynamics, objective, rms_torque_sum, torque_table,
)
from modsynth.library import ModularUnit, default_library

seeds = st.integers(0, 2**32 - 1)
M, L, G = 0.8, 0.35, 9.81


@pytest.mark.parametrize("theta", np.linspace(-math.pi, math.pi, 13))
def test_pendulum_statics(theta):
    tau = gravity_torque(pendulum(M, L), np.array([theta]))
    assert abs(tau[0] - M * G * L * math.sin(theta)) <= 1e-9


def test_pendulum_horizontal():
    tau = gravity_torque(pendulum(M, L), np.array([math.pi / 2]))
    assert abs(tau[0] - M * G * L) <= 1e-9


def test_pendulum_dynamics():
    # point mass: tau = m L^2 qdd + m g L sin(q); no velocity term for one joint
    q, qd, qdd = 0.4, 2.0, -1.5
    tau = inverse_dynamics(pendulum(M, L), [q], [qd], [qdd])
    assert abs(tau[0] - (M * L * L * qdd + M * G * L * math.sin(q))) <= 1e-9


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_no_forcing_no_torque(seed):
    rng = np.random.default_rng(seed)
    ch, _ = random_chain(rng)
    assert np.abs(inverse_dynamics(ch, random_q(rng, ch), gravity=np.zeros(3))).max() <= 1e-12


def test_vertical_stack_has_no_gravity_torque():
    ch = build_chain(Composition([ModularUnit("H", 1), ModularUnit("H", 1), ModularUnit("L", 1)]),
                     default_library())
    assert np.abs(gravity_torque(ch, np.zeros(3))).max() <= 1e-9


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_gravity_is_potential_gradient(seed):
    rng = np.random.default_rng(seed)
    ch, _ = random_chain(rng)
    q = random_q(rng, ch)
    h = 1e-6
    fd = np.array([(oracles.potential(ch, q + h * e) - oracles.potential(ch, q - h * e)) / (2 * h)
                   for e in np.eye(ch.dof)])
    assert np.abs(gravity_torque(ch, q) - fd).max() <= 1e-6


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_inverse_dynamics_matches_lagrangian(seed):
    rng = np.random.default_rng(seed)
    ch, _ = random_chain(rng)
    q, qd, qdd = random_q(rng, ch), rng.normal(0, 1.5, ch.dof), rng.normal(0, 3, ch.dof)
    pl = Payload(rng.uniform(0, 0.5), rng.uniform(-0.05, 0.05, 3))
    ref = oracles.lagrange_torque(ch, q, qd, qdd, pl)
    tau = inverse_dynamics(ch, q, qd, qdd, payload=pl)
    assert np.abs(tau - ref).max() <= 1e-5 * max(1.0, np.abs(ref).max())


@settings(max_examples=30, deadline=None)
@given(seeds, st.floats(-3, 3))
def test_gravity_linearity(seed, c):
    rng = np.random.default_rng(seed)
    ch, _ = random_chain(rng)
    q = random_q(rng, ch)
    g = np.array([0.0, 0.0, -9.81])
    assert np.allclose(gravity_torque(ch, q, c * g), c * gravity_torque(ch, q, g), rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_static_inverse_dynamics_is_gravity_torque(seed):
    rng = np.random.default_rng(seed)
    ch, _ = random_chain(rng)
    q = random_q(rng, ch)
    n = ch.dof
    assert np.array_equal(inverse_dynamics(ch, q, np.zeros(n), np.zeros(n)), gravity_torque(ch, q))


def test_payload_increases_first_joint_torque():
    # first joint horizontal, arm held out to one side
    ch = build_chain(Composition([ModularUnit("H", 2), ModularUnit("H", 3, 0, "S2"), ModularUnit("L", 3, 0, "S1")]),
                     default_library())
    qs = [np.array([a, 0.3, -0.2]) for a in (0.6, 0.9, 1.2)]
    base = np.abs(torque_table(ch, qs)).max(axis=0)[0]
    for m in (0.1, 0.5, 1.0):
        with_load = np.abs(torque_table(ch, qs, payload=Payload(m))).max(axis=0)[0]
        assert with_load >= base
        base = with_load


def test_work_energy():
    rng = np.random.default_rng(2)
    ch, _ = random_chain(rng, with_base=False)
    q0, amp, w = random_q(rng, ch), rng.uniform(0.2, 0.8, ch.dof), rng.uniform(0.5, 2.0, ch.dof)
    t = np.linspace(0.0, 1.5, 3001)
    q = q0 + amp * np.sin(np.outer(t, w))
    qd = amp * w * np.cos(np.outer(t, w))
    qdd = -amp * w * w * np.sin(np.outer(t, w))
    power = np.array([inverse_dynamics(ch, a, b, c) @ b for a, b, c in zip(q, qd, qdd)])
    work = float(np.sum(0.5 * (power[1:] + power[:-1]) * np.diff(t)))
    dE = oracles.energy(ch, q[-1], qd[-1]) - oracles.energy(ch, q[0], qd[0])
    scale = max(abs(dE), np.abs(power).max() * t[-1] * 1e-2)
    assert abs(work - dE) <= 1e-3 * scale


def test_objective_arithmetic():
    assert objective(pendulum(M, L), [np.array([0.0]), np.array([0.0])]) == 0.0
    assert rms_torque_sum([[3.0], [4.0]]) == pytest.approx(math.sqrt(12.5))
    with pytest.raises(ValueError):
        objective(pendulum(M, L), [])


def test_objective_replays_stored_table(tmp_path):
    from modsynth.results import load_result, read_torque_csv, write_torque_csv

    data, task, _, _ = load_result(fixture("golden/case1a_seed7/result.json"))
    from modsynth.results import load_composition
    ch = build_chain(load_composition(fixture("golden/case1a_seed7/result.json")), default_library())
    sols = [np.array(q) for q in data["ik_solutions"][:3]]
    table = torque_table(ch, sols)
    p = tmp_path / "t.csv"
    write_torque_csv(p, table, ch.effort_limits)
    replay = read_torque_csv(p)
    brute = sum(math.sqrt(sum(replay[j, i] ** 2 for j in range(3)) / 3) for i in range(ch.dof))
    assert abs(objective(ch, sols) - brute) <= 1e-12


def test_torque_limit_margins():
    ch = build_chain(Composition([ModularUnit("H", 1), ModularUnit("L", 1)]), default_library())
    r = check_torque_limits(ch, [[4.0, 1.0], [-2.0, 3.0]])
    assert r.ok and np.allclose(r.margins, [8.0, 0.6])
    r = check_torque_limits(ch, [[0.0, -3.7]])
    assert not r.ok and r.violations == [(1, 0, 3.7, 3.6)]
    assert r.excess() == pytest.approx(0.1)
    r = check_torque_limits(ch, np.zeros((2, 2)))
    assert np.array_equal(r.margins, ch.effort_limits)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        inverse_dynamics(pendulum(M, L), [0.0], [0.0, 1.0])
