"""Compiled segment-versus-box distance kernel used by :mod:`modsynth.collision`."""
import math

from numba import njit


@njit(cache=True)
def _local_sdf(p0, d, t, h):
    out = 0.0
    inside = -math.inf
    for i in range(3):
        q = abs(p0[i] + t * d[i]) - h[i]
        if q > 0:
            out += q * q
        if q > inside:
            inside = q
    return math.sqrt(out) + min(inside, 0.0)


@njit(cache=True)
def segment_box_local(p0, d, h):
    """Minimum box SDF over ``p0 + t d``, t in [0, 1], in box coordinates."""
    cand = [0.0, 1.0]
    breaks = []
    for i in range(3):
        if d[i] != 0.0:
            cand.append(-p0[i] / d[i])
            for s in (-1.0, 1.0):
                t = (s * h[i] - p0[i]) / d[i]
                if 0.0 < t < 1.0:
                    breaks.append(t)
    breaks.sort()
    for t in breaks:
        cand.append(t)
    edges = [0.0] + breaks + [1.0]
    for k in range(len(edges) - 1):
        lo, hi = edges[k], edges[k + 1]
        tm = 0.5 * (lo + hi)
        num, den = 0.0, 0.0
        for i in range(3):
            m = p0[i] + tm * d[i]
            side = 1.0 if m > h[i] else (-1.0 if m < -h[i] else 0.0)
            if side != 0.0:
                den += d[i] * d[i]
                num += d[i] * (p0[i] - side * h[i])
        if den > 0:
            cand.append(min(hi, max(lo, -num / den)))
    for i in range(3):
        for j in range(i + 1, 3):
            for si in (-1.0, 1.0):
                for sj in (-1.0, 1.0):
                    den = si * d[i] - sj * d[j]
                    if den != 0.0:
                        cand.append((h[i] - h[j] - si * p0[i] + sj * p0[j]) / den)
    best = math.inf
    for t in cand:
        if 0.0 <= t <= 1.0:
            v = _local_sdf(p0, d, t, h)
            if v < best:
                best = v
    return best
