"""Compiled damped least-squares kernel used by :mod:`modsynth.kinematics`."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _fk(base, pre, ee_off, q, poses):
    n = q.shape[0]
    T = base.copy()
    for k in range(n):
        T = T @ pre[k]
        c, s = math.cos(q[k]), math.sin(q[k])
        for r in range(3):
            x, y = T[r, 0], T[r, 1]
            T[r, 0] = c * x + s * y
            T[r, 1] = -s * x + c * y
        poses[k] = T
    return T @ ee_off


@njit(cache=True)
def _log(R):
    cos_a = (R[0, 0] + R[1, 1] + R[2, 2] - 1.0) / 2.0
    cos_a = min(1.0, max(-1.0, cos_a))
    angle = math.acos(cos_a)
    w = np.empty(3)
    w[0] = R[2, 1] - R[1, 2]
    w[1] = R[0, 2] - R[2, 0]
    w[2] = R[1, 0] - R[0, 1]
    if angle < 1e-6:
        return 0.5 * w
    if math.pi - angle < 1e-6:
        k = 0
        for i in range(1, 3):
            if R[i, i] > R[k, k]:
                k = i
        M = (R + np.eye(3)) / 2.0
        axis = M[:, k] / math.sqrt(max(M[k, k], 1e-300))
        if axis[0] * w[0] + axis[1] * w[1] + axis[2] * w[2] < 0:
            axis = -axis
        return axis * angle
    return w * (angle / (2.0 * math.sin(angle)))


@njit(cache=True)
def _error(ee, target_p, R_t, use_ori, e):
    for i in range(3):
        e[i] = target_p[i] - ee[i, 3]
    pn = math.sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
    on = 0.0
    if use_ori:
        Rc = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                Rc[i, j] = R_t[i, 0] * ee[j, 0] + R_t[i, 1] * ee[j, 1] + R_t[i, 2] * ee[j, 2]
        eo = _log(Rc)
        for i in range(3):
            e[3 + i] = eo[i]
        on = math.sqrt(eo[0] * eo[0] + eo[1] * eo[1] + eo[2] * eo[2])
    return pn, on


@njit(cache=True)
def dls(base, pre, ee_off, lo, hi, q0, target_p, R_t, use_ori, stop_p, stop_o, max_iter, damping):
    n = q0.shape[0]
    m = 6 if use_ori else 3
    q = np.minimum(np.maximum(q0, lo), hi)
    poses = np.empty((n, 4, 4))
    poses_n = np.empty((n, 4, 4))
    e = np.zeros(m)
    e_n = np.zeros(m)
    ee = _fk(base, pre, ee_off, q, poses)
    pn, on = _error(ee, target_p, R_t, use_ori, e)
    cost = 0.0
    for i in range(m):
        cost += e[i] * e[i]
    lam = damping
    J = np.empty((m, n))
    stall = 0
    it = 0
    for it in range(1, max_iter + 1):
        if pn <= stop_p and on <= stop_o:
            break
        pe = ee[:3, 3]
        for k in range(n):
            z = poses[k, :3, 2]
            r = pe - poses[k, :3, 3]
            J[0, k] = z[1] * r[2] - z[2] * r[1]
            J[1, k] = z[2] * r[0] - z[0] * r[2]
            J[2, k] = z[0] * r[1] - z[1] * r[0]
            if use_ori:
                J[3, k] = z[0]
                J[4, k] = z[1]
                J[5, k] = z[2]
        A = J @ J.T
        for i in range(m):
            A[i, i] += lam * lam
        dq = J.T @ np.linalg.solve(A, e)
        q_new = np.minimum(np.maximum(q + dq, lo), hi)
        ee_n = _fk(base, pre, ee_off, q_new, poses_n)
        pn_n, on_n = _error(ee_n, target_p, R_t, use_ori, e_n)
        cost_n = 0.0
        for i in range(m):
            cost_n += e_n[i] * e_n[i]
        if cost_n < cost:
            # accepted step; count it as stalled when the gain is negligible
            if cost - cost_n < 1e-6 * cost:
                stall += 1
            else:
                stall = 0
            q = q_new
            poses, poses_n = poses_n, poses
            e, e_n = e_n, e
            ee = ee_n
            pn, on, cost = pn_n, on_n, cost_n
            lam = max(lam / 10.0, 1e-6)
        else:
            lam *= 10.0
            stall += 1
            if lam > 1e6:
                break
        if stall >= 8:
            break
    return q, it
