"""Reference computations that share no code with the package.

Kinematics is a plain product of 4x4 matrices built from scratch; dynamics
comes from the Lagrangian (mass matrix via complex-step Jacobians, Coriolis
terms via finite differences of that matrix); distances come from sampling
primitive surfaces and refining around the closest sample pair.
"""
import numpy as np

G = np.array([0.0, 0.0, -9.81])
CSTEP = 1e-30


# --- kinematics --------------------------------------------------------------

def rz(a):
    """Homogeneous rotation about z; works for complex angles too."""
    c, s = np.cos(a), np.sin(a)
    T = np.eye(4, dtype=np.result_type(a, float))
    T[0, 0], T[0, 1], T[1, 0], T[1, 1] = c, -s, s, c
    return T


def frames(chain, q):
    """World frame of every joint after rotation, plus the tool frame."""
    q = np.asarray(q)
    dt = np.result_type(q.dtype, float)
    T = np.array(chain.base, dtype=dt)
    out = []
    for k in range(len(chain.pre)):
        T = np.matmul(np.matmul(T, chain.pre[k].astype(dt)), rz(q[k]))
        out.append(T)
    return out, np.matmul(T, chain.ee_offset.astype(dt))


def fk_position(chain, q):
    return frames(chain, q)[1][:3, 3]


def fd_jacobian(chain, q, h=1e-7):
    """Central differences: linear rows from positions, angular rows from rotations."""
    q = np.asarray(q, float)
    n = len(q)
    J = np.zeros((6, n))
    R0 = frames(chain, q)[1][:3, :3]
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        Tp, Tm = frames(chain, q + e)[1], frames(chain, q - e)[1]
        J[:3, k] = (Tp[:3, 3] - Tm[:3, 3]) / (2 * h)
        W = (Tp[:3, :3] - Tm[:3, :3]) / (2 * h) @ R0.T
        J[3:, k] = [W[2, 1], W[0, 2], W[1, 0]]
    return J


# --- dynamics ----------------------------------------------------------------

def _mass_points(chain, q, payload=None):
    """(mass, world com, world rotation, body inertia) for every moving body."""
    fr, ee = frames(chain, q)
    out = []
    for T, b in zip(fr, chain.bodies):
        c = T[:3, :3] @ b.com + T[:3, 3]
        out.append((b.mass, c, T[:3, :3], b.inertia))
    if payload is not None and payload.mass > 0:
        c = ee[:3, :3] @ payload.offset + ee[:3, 3]
        out.append((payload.mass, c, ee[:3, :3], np.zeros((3, 3))))
    return out


def potential(chain, q, payload=None, g=G):
    return float(sum(-m * (g @ c) for m, c, _, _ in _mass_points(chain, q, payload)))


def body_jacobians(chain, q, payload=None):
    """Complex-step com Jacobians and angular-velocity Jacobians for every body."""
    q = np.asarray(q, float)
    n = len(q)
    base = _mass_points(chain, q, payload)
    Jc = [np.zeros((3, n)) for _ in base]
    Jw = [np.zeros((3, n)) for _ in base]
    for k in range(n):
        qc = q.astype(complex)
        qc[k] += 1j * CSTEP
        pts = _mass_points(chain, qc, payload)
        for b, ((_, c, R, _), (_, _, R0, _)) in enumerate(zip(pts, base)):
            Jc[b][:, k] = c.imag / CSTEP
            W = (R.imag / CSTEP) @ R0.T
            Jw[b][:, k] = [W[2, 1], W[0, 2], W[1, 0]]
    return base, Jc, Jw


def mass_matrix(chain, q, payload=None):
    base, Jc, Jw = body_jacobians(chain, q, payload)
    n = len(q)
    M = np.zeros((n, n))
    for (m, _, R, I), jc, jw in zip(base, Jc, Jw):
        M += m * jc.T @ jc + jw.T @ (R @ I @ R.T) @ jw
    return M


def gravity_vector(chain, q, payload=None, g=G):
    base, Jc, _ = body_jacobians(chain, q, payload)
    return -sum(m * jc.T @ g for (m, _, _, _), jc in zip(base, Jc))


def lagrange_torque(chain, q, qd, qdd, payload=None, h=1e-6, g=G):
    """tau = M qdd + dM/dt qd - 1/2 d(qd' M qd)/dq + dV/dq."""
    q, qd, qdd = (np.asarray(v, float) for v in (q, qd, qdd))
    n = len(q)
    dM = []
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dM.append((mass_matrix(chain, q + e, payload) - mass_matrix(chain, q - e, payload)) / (2 * h))
    Mdot = sum(dM[k] * qd[k] for k in range(n))
    dT = np.array([0.5 * qd @ dM[k] @ qd for k in range(n)])
    return mass_matrix(chain, q, payload) @ qdd + Mdot @ qd - dT + gravity_vector(chain, q, payload, g)


def energy(chain, q, qd, payload=None):
    qd = np.asarray(qd, float)
    return 0.5 * qd @ mass_matrix(chain, q, payload) @ qd + potential(chain, q, payload)


# --- distances ---------------------------------------------------------------

def _sphere_patch(c, r, R, zsign=None):
    """Sphere or hemisphere (z >= 0 side when zsign=1) centred at local point c."""
    def f(u, v):
        if zsign is None:
            th = np.pi * u
        else:
            th = 0.5 * np.pi * u if zsign > 0 else np.pi - 0.5 * np.pi * u
        ph = 2 * np.pi * v
        p = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1)
        return c + r * p
    return f


def _patches(prim):
    """Parametric surface patches in the local frame, each mapping [0,1]^2 to points."""
    k, d = prim.kind, prim.dims
    if k == "sphere":
        return [_sphere_patch(np.zeros(3), d[0], None)]
    if k == "box":
        out = []
        h = np.asarray(d)
        for axis in range(3):
            a, b = [i for i in range(3) if i != axis]
            for sign in (-1.0, 1.0):
                def f(u, v, axis=axis, a=a, b=b, sign=sign):
                    p = np.zeros(np.broadcast(u, v).shape + (3,))
                    p[..., axis] = sign * h[axis]
                    p[..., a] = (2 * u - 1) * h[a]
                    p[..., b] = (2 * v - 1) * h[b]
                    return p
                out.append(f)
        return out
    r, L = d

    def side(u, v):
        ph = 2 * np.pi * v
        return np.stack([r * np.cos(ph), r * np.sin(ph), (u - 0.5) * L * np.ones_like(ph)], -1)

    if k == "capsule":
        return [side,
                _sphere_patch(np.array([0, 0, L / 2]), r, None, 1),
                _sphere_patch(np.array([0, 0, -L / 2]), r, None, -1)]
    caps = []
    for z in (L / 2, -L / 2):
        def disk(u, v, z=z):
            ph = 2 * np.pi * v
            return np.stack([r * u * np.cos(ph), r * u * np.sin(ph), z * np.ones_like(ph)], -1)
        caps.append(disk)
    return [side] + caps


def _world(prim, f, u, v):
    p = f(u, v)
    return p @ prim.pose[:3, :3].T + prim.pose[:3, 3]


def _v(prim, v):
    # v is the azimuth on round patches, so it wraps instead of clipping
    return np.clip(v, 0, 1) if prim.kind == "box" else np.mod(v, 1.0)


def sampled_distance(a, b, coarse=24, fine=11, rounds=40, starts=6):
    """Minimum surface-to-surface distance of two separated convex primitives."""
    g = np.linspace(0.0, 1.0, coarse)
    U, V = np.meshgrid(g, g, indexing="ij")

    def cloud(prim):
        pts, tags = [], []
        for i, f in enumerate(_patches(prim)):
            p = _world(prim, f, U, V).reshape(-1, 3)
            pts.append(p)
            tags.append(np.column_stack([np.full(len(p), i), U.ravel(), V.ravel()]))
        return np.vstack(pts), np.vstack(tags)

    pa, ta = cloud(a)
    pb, tb = cloud(b)
    # coarse pass only ranks candidate pairs, so the Gram form is accurate enough
    D = np.sqrt(np.maximum((pa * pa).sum(1)[:, None] + (pb * pb).sum(1)[None, :] - 2 * pa @ pb.T, 0.0))
    flat = np.argsort(D, axis=None)[: starts * 20]
    seeds, seen = [], set()
    for idx in flat:
        i, j = np.unravel_index(idx, D.shape)
        key = (int(ta[i, 0]), int(tb[j, 0]))
        if key in seen:
            continue
        seen.add(key)
        seeds.append((ta[i], tb[j]))
        if len(seeds) == starts:
            break
    pa_f, pb_f = _patches(a), _patches(b)
    best = np.inf
    for sa, sb in seeds:
        (ia, ua, va), (ib, ub, vb) = (int(sa[0]), sa[1], sa[2]), (int(sb[0]), sb[1], sb[2])
        w = 2.0 / coarse
        for _ in range(rounds):
            ga = np.linspace(-w, w, fine)
            UA, VA = np.meshgrid(np.clip(ua + ga, 0, 1), _v(a, va + ga), indexing="ij")
            UB, VB = np.meshgrid(np.clip(ub + ga, 0, 1), _v(b, vb + ga), indexing="ij")
            xa = _world(a, pa_f[ia], UA, VA).reshape(-1, 3)
            xb = _world(b, pb_f[ib], UB, VB).reshape(-1, 3)
            d = np.linalg.norm(xa[:, None, :] - xb[None, :, :], axis=-1)
            i, j = np.unravel_index(np.argmin(d), d.shape)
            ua, va = UA.ravel()[i], VA.ravel()[i]
            ub, vb = UB.ravel()[j], VB.ravel()[j]
            best = min(best, float(d[i, j]))
            w *= 0.6
    return best


def inside(prim, x):
    """Point-in-solid test in the primitive's local frame."""
    p = prim.pose[:3, :3].T @ (np.asarray(x, float) - prim.pose[:3, 3])
    k, d = prim.kind, prim.dims
    if k == "sphere":
        return np.linalg.norm(p) < d[0]
    if k == "box":
        return bool(np.all(np.abs(p) < d))
    r, L = d
    if k == "cylinder":
        return np.hypot(p[0], p[1]) < r and abs(p[2]) < L / 2
    z = np.clip(p[2], -L / 2, L / 2)
    return np.linalg.norm(p - [0, 0, z]) < r
