"""Recursive Newton-Euler inverse dynamics and torque-based objectives."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kinematics import forward_kinematics

GRAVITY = np.array([0.0, 0.0, -9.81])


@dataclass
class Payload:
    mass: float = 0.0
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))  # in the end-effector frame

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("payload mass must be non-negative")
        self.offset = np.asarray(self.offset, dtype=float)


def inverse_dynamics(chain, q, qd=None, qdd=None, gravity=GRAVITY, payload: Optional[Payload] = None):
    """Joint torques for state ``(q, qd, qdd)`` by recursive Newton-Euler.

    Velocities and accelerations are propagated in the world frame; gravity
    enters as an upward acceleration of the fixed base.
    """
    n = chain.dof
    q = np.asarray(q, dtype=float)
    qd = np.zeros(n) if qd is None else np.asarray(qd, dtype=float)
    qdd = np.zeros(n) if qdd is None else np.asarray(qdd, dtype=float)
    if qd.shape != (n,) or qdd.shape != (n,):
        raise ValueError(f"state vectors must have length {n}")
    poses, ee = forward_kinematics(chain, q)
    g = np.asarray(gravity, dtype=float)

    w = np.zeros(3)
    dw = np.zeros(3)
    a_prev = -g
    p_prev = chain.base[:3, 3]
    forces, moments, origins = [], [], []
    for k in range(n):
        T = poses[k]
        z, p = T[:3, 2], T[:3, 3]
        r = p - p_prev
        a_o = a_prev + np.cross(dw, r) + np.cross(w, np.cross(w, r))
        w_new = w + z * qd[k]
        dw = dw + z * qdd[k] + np.cross(w, z * qd[k])
        w = w_new
        body = chain.bodies[k]
        R = T[:3, :3]
        c = R @ body.com
        a_c = a_o + np.cross(dw, c) + np.cross(w, np.cross(w, c))
        I = R @ body.inertia @ R.T
        F = body.mass * a_c
        N = I @ dw + np.cross(w, I @ w)
        N = N + np.cross(c, F)
        if k == n - 1 and payload is not None and payload.mass > 0:
            pp = ee[:3, 3] + ee[:3, :3] @ payload.offset - p
            a_p = a_o + np.cross(dw, pp) + np.cross(w, np.cross(w, pp))
            Fp = payload.mass * a_p
            F = F + Fp
            N = N + np.cross(pp, Fp)
        forces.append(F)
        moments.append(N)
        origins.append(p)
        a_prev, p_prev = a_o, p

    tau = np.empty(n)
    f = np.zeros(3)
    m = np.zeros(3)
    for k in range(n - 1, -1, -1):
        if k + 1 < n:
            m = m + np.cross(origins[k + 1] - origins[k], f)
        f = forces[k] + f
        m = moments[k] + m
        tau[k] = float(poses[k][:3, 2] @ m)
    return tau


def gravity_torque(chain, q, gravity=GRAVITY, payload: Optional[Payload] = None):
    return inverse_dynamics(chain, q, None, None, gravity, payload)


def objective(chain, ik_solutions, gravity=GRAVITY, payload: Optional[Payload] = None):
    """Sum over joints of the rms (over task locations) static joint torque."""
    if len(ik_solutions) == 0:
        raise ValueError("objective needs at least one task location")
    table = torque_table(chain, ik_solutions, gravity, payload)
    return rms_torque_sum(table)


def torque_table(chain, solutions, gravity=GRAVITY, payload: Optional[Payload] = None):
    """(N, n) array of static torques, one row per configuration."""
    return np.array([gravity_torque(chain, q, gravity, payload) for q in solutions])


def rms_torque_sum(table):
    table = np.asarray(table, dtype=float)
    return float(np.sum(np.sqrt(np.mean(table ** 2, axis=0))))


@dataclass
class TorqueLimitReport:
    margins: np.ndarray  # limit - max |tau| per joint
    violations: list     # (joint index, configuration index, |tau|, limit)

    @property
    def ok(self):
        return not self.violations

    def excess(self):
        """Sum over joints and configurations of torque beyond the limit."""
        return float(sum(t - lim for _, _, t, lim in self.violations))


def check_torque_limits(chain, torques_per_config) -> TorqueLimitReport:
    table = np.abs(np.atleast_2d(np.asarray(torques_per_config, dtype=float)))
    if table.shape[1] != chain.dof:
        raise ValueError(f"torque table has {table.shape[1]} columns, chain has {chain.dof} joints")
    limits = chain.effort_limits
    margins = limits - table.max(axis=0)
    violations = [
        (i, j, float(table[j, i]), float(limits[i]))
        for j in range(table.shape[0]) for i in range(chain.dof)
        if table[j, i] > limits[i]
    ]
    return TorqueLimitReport(margins, violations)
