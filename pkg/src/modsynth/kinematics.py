"""Forward kinematics, geometric Jacobian and damped least-squares IK."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._ikcore import dls
from .transforms import quat_to_matrix, rotation_log


def _check_q(chain, q):
    q = np.asarray(q, dtype=float)
    if q.shape != (chain.dof,):
        raise ValueError(f"joint vector has shape {q.shape}, chain has {chain.dof} joints")
    return q


def forward_kinematics(chain, q):
    """Body poses (n, 4, 4) and end-effector pose for joint angles ``q``.

    Body ``k`` is the moving frame of joint ``k``; its z axis is the joint axis.
    """
    q = _check_q(chain, q)
    poses = np.empty((chain.dof, 4, 4))
    T = chain.base
    for k in range(chain.dof):
        T = T @ chain.pre[k]
        c, s = math.cos(q[k]), math.sin(q[k])
        Tq = T.copy()
        Tq[:3, 0] = c * T[:3, 0] + s * T[:3, 1]
        Tq[:3, 1] = -s * T[:3, 0] + c * T[:3, 1]
        T = Tq
        poses[k] = T
    return poses, T @ chain.ee_offset


def end_effector(chain, q):
    return forward_kinematics(chain, q)[1]


def jacobian(chain, q, poses=None, ee=None):
    """6 x n geometric Jacobian at the end-effector point, world frame.

    Rows 0-2 are linear velocity, rows 3-5 angular velocity.
    """
    if poses is None:
        poses, ee = forward_kinematics(chain, q)
    pe = ee[:3, 3]
    Z = poses[:, :3, 2]
    r = pe - poses[:, :3, 3]
    J = np.empty((6, chain.dof))
    J[0] = Z[:, 1] * r[:, 2] - Z[:, 2] * r[:, 1]
    J[1] = Z[:, 2] * r[:, 0] - Z[:, 0] * r[:, 2]
    J[2] = Z[:, 0] * r[:, 1] - Z[:, 1] * r[:, 0]
    J[3:] = Z.T
    return J


@dataclass
class TargetPose:
    position: np.ndarray
    orientation: Optional[np.ndarray] = None  # unit quaternion (w, x, y, z)

    def __post_init__(self):
        self.position = np.array(self.position, dtype=float).reshape(3)
        if self.orientation is not None:
            q = np.asarray(self.orientation, dtype=float)
            self.orientation = q / np.linalg.norm(q)

    @property
    def rotation(self):
        return None if self.orientation is None else quat_to_matrix(self.orientation)


@dataclass
class IKSettings:
    pos_tol: float = 1e-3
    ori_tol: float = 1e-2
    max_iterations: int = 300
    damping: float = 1e-3
    # iteration stops once the error is this far inside tolerance
    converge_factor: float = 1e-3


@dataclass
class IKResult:
    q: np.ndarray
    position_residual: float
    orientation_residual: float
    success: bool
    seeds_tried: int
    seed_index: int = 0
    iterations: int = 0

    @property
    def residual(self):
        return self.position_residual + 0.1 * self.orientation_residual


def pose_error(chain, q, target: TargetPose, R_target=None):
    """Error vector (position [, rotation vector]) and its two norms."""
    _, ee = forward_kinematics(chain, q)
    ep = target.position - ee[:3, 3]
    if target.orientation is None:
        return ep, float(np.linalg.norm(ep)), 0.0
    if R_target is None:
        R_target = target.rotation
    eo = rotation_log(R_target @ ee[:3, :3].T)
    return np.concatenate([ep, eo]), float(np.linalg.norm(ep)), float(np.linalg.norm(eo))


def _ik_from(chain, q0, target, settings: IKSettings, R_target):
    use_ori = target.orientation is not None
    q, it = dls(
        chain.base, chain.pre, chain.ee_offset,
        chain.joint_limits[:, 0].copy(), chain.joint_limits[:, 1].copy(),
        np.ascontiguousarray(q0, dtype=float), target.position,
        np.ascontiguousarray(R_target) if use_ori else np.eye(3), use_ori,
        settings.pos_tol * settings.converge_factor,
        settings.ori_tol * settings.converge_factor,
        settings.max_iterations, settings.damping,
    )
    # residuals are re-measured with the reference forward kinematics
    _, pn, on = pose_error(chain, q, target, R_target)
    return q, pn, on, it


def ik_attempts(chain, target: TargetPose, seeds=20, rng_seed=0, settings: Optional[IKSettings] = None):
    """Yield one :class:`IKResult` per seed: the zero vector first, then uniform random seeds."""
    settings = settings or IKSettings()
    rng = np.random.default_rng(rng_seed)
    lo, hi = chain.joint_limits[:, 0], chain.joint_limits[:, 1]
    R_target = target.rotation
    for k in range(seeds):
        q0 = np.zeros(chain.dof) if k == 0 else rng.uniform(lo, hi)
        q, pn, on, it = _ik_from(chain, q0, target, settings, R_target)
        ok = pn <= settings.pos_tol and (target.orientation is None or on <= settings.ori_tol)
        yield IKResult(q, pn, on, ok, k + 1, k, it)


def _rank(r: IKResult):
    return (not r.success, r.residual)


def solve_ik(chain, target: TargetPose, seeds=20, rng_seed=0, settings: Optional[IKSettings] = None) -> IKResult:
    """Damped least-squares IK with restarts; returns the smallest-residual solution.

    ``success`` on the result tells whether the tolerances were met; a failed
    solve is a value, not an exception.
    """
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    best = None
    for r in ik_attempts(chain, target, seeds, rng_seed, settings):
        if best is None or _rank(r) < _rank(best):
            best = r
    best.seeds_tried = seeds
    return best
