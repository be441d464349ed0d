"""Homogeneous-transform helpers.

Rigid transforms are plain 4x4 ``numpy`` arrays throughout the package.
"""
import math

import numpy as np


def rot_x(a):
    c, s = math.cos(a), math.sin(a)
    T = np.eye(4)
    T[1, 1], T[1, 2], T[2, 1], T[2, 2] = c, -s, s, c
    return T


def rot_y(a):
    c, s = math.cos(a), math.sin(a)
    T = np.eye(4)
    T[0, 0], T[0, 2], T[2, 0], T[2, 2] = c, s, -s, c
    return T


def rot_z(a):
    c, s = math.cos(a), math.sin(a)
    T = np.eye(4)
    T[0, 0], T[0, 1], T[1, 0], T[1, 1] = c, -s, s, c
    return T


def trans(x=0.0, y=0.0, z=0.0):
    T = np.eye(4)
    T[:3, 3] = (x, y, z)
    return T


def trans_z(d):
    return trans(0.0, 0.0, d)


def make_transform(R=None, p=None):
    T = np.eye(4)
    if R is not None:
        T[:3, :3] = R
    if p is not None:
        T[:3, 3] = p
    return T


def inverse(T):
    Ti = np.eye(4)
    R = T[:3, :3]
    Ti[:3, :3] = R.T
    Ti[:3, 3] = -R.T @ T[:3, 3]
    return Ti


def is_rigid(T, tol=1e-9):
    R = T[:3, :3]
    return (
        T.shape == (4, 4)
        and np.allclose(T[3], [0, 0, 0, 1])
        and np.allclose(R @ R.T, np.eye(3), atol=tol)
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def rpy_to_matrix(roll, pitch, yaw):
    """Fixed-axis roll/pitch/yaw (URDF convention): ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    return (rot_z(yaw) @ rot_y(pitch) @ rot_x(roll))[:3, :3]


def matrix_to_rpy(R):
    """Inverse of :func:`rpy_to_matrix`.

    At the gimbal-degenerate pitch of +-90 deg the roll is fixed to 0 and the
    whole residual rotation is assigned to yaw.
    """
    cp = math.hypot(R[0, 0], R[1, 0])
    pitch = math.atan2(-R[2, 0], cp)
    if cp < 1e-10:
        # with roll = 0: R[0,1] = -sin(yaw), R[1,1] = cos(yaw)
        return 0.0, pitch, math.atan2(-R[0, 1], R[1, 1])
    roll = math.atan2(R[2, 1], R[2, 2])
    yaw = math.atan2(R[1, 0], R[0, 0])
    return roll, pitch, yaw


def euler_xyz_to_matrix(a, b, c):
    """Intrinsic X-Y-Z Euler angles (radians): ``Rx(a) @ Ry(b) @ Rz(c)``."""
    return (rot_x(a) @ rot_y(b) @ rot_z(c))[:3, :3]


def matrix_to_quat(R):
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0``."""
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def quat_to_matrix(q):
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def rotation_log(R):
    """Rotation vector (axis * angle) of a rotation matrix."""
    cos_a = max(-1.0, min(1.0, (R[0, 0] + R[1, 1] + R[2, 2] - 1.0) / 2.0))
    angle = math.acos(cos_a)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if angle < 1e-6:
        return 0.5 * w
    if math.pi - angle < 1e-6:
        # near pi the antisymmetric part vanishes; recover the axis from R + I
        M = (R + np.eye(3)) / 2.0
        k = int(np.argmax(np.diag(M)))
        axis = M[:, k] / math.sqrt(max(M[k, k], 1e-300))
        if np.dot(axis, w) < 0:
            axis = -axis
        return axis * angle
    return w * (angle / (2.0 * math.sin(angle)))
