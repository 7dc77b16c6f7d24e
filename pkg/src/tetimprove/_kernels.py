"""Compiled inner loops shared by quality evaluation and the local operators.

All kernels treat a tetrahedron whose orientation determinant is inside the
floating-point error bound as flat (quality 0); callers that need an exact
sign go through :func:`tetimprove.predicates.orient3d`.
"""

import math

import numpy as np
from numba import njit

SQRT24 = math.sqrt(24.0)
_ERRBOUND = (7.0 + 56.0 * 2.0 ** -53) * 2.0 ** -53


@njit(cache=True, nogil=True)
def _before(p, i, j):
    # lexicographic comparison of points i and j of the flat 12-array
    for k in range(3):
        if p[3 * i + k] != p[3 * j + k]:
            return p[3 * i + k] < p[3 * j + k]
    return False


@njit(cache=True, nogil=True)
def gamma_xyz(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    """Signed gamma, evaluated on the vertices in lexicographic order so
    every relabelling of a tetrahedron rounds identically."""
    p = np.empty(12)
    p[0], p[1], p[2], p[3], p[4], p[5] = ax, ay, az, bx, by, bz
    p[6], p[7], p[8], p[9], p[10], p[11] = cx, cy, cz, dx, dy, dz
    o0, o1, o2, o3 = 0, 1, 2, 3
    sign = 1.0
    # four-element sorting network, tracking the permutation parity
    if _before(p, o1, o0):
        o0, o1 = o1, o0
        sign = -sign
    if _before(p, o3, o2):
        o2, o3 = o3, o2
        sign = -sign
    if _before(p, o2, o0):
        o0, o2 = o2, o0
        sign = -sign
    if _before(p, o3, o1):
        o1, o3 = o3, o1
        sign = -sign
    if _before(p, o2, o1):
        o1, o2 = o2, o1
        sign = -sign
    q = _gamma_raw(p[3 * o0], p[3 * o0 + 1], p[3 * o0 + 2],
                   p[3 * o1], p[3 * o1 + 1], p[3 * o1 + 2],
                   p[3 * o2], p[3 * o2 + 1], p[3 * o2 + 2],
                   p[3 * o3], p[3 * o3 + 1], p[3 * o3 + 2])
    return sign * q


@njit(cache=True, nogil=True)
def _gamma_raw(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    ux, uy, uz = bx - ax, by - ay, bz - az
    vx, vy, vz = cx - ax, cy - ay, cz - az
    wx, wy, wz = dx - ax, dy - ay, dz - az
    t1 = vy * wz
    t2 = vz * wy
    t3 = vz * wx
    t4 = vx * wz
    t5 = vx * wy
    t6 = vy * wx
    det = ux * (t1 - t2) + uy * (t3 - t4) + uz * (t5 - t6)
    perm = (abs(t1) + abs(t2)) * abs(ux) + (abs(t3) + abs(t4)) * abs(uy) \
        + (abs(t5) + abs(t6)) * abs(uz)
    if abs(det) <= _ERRBOUND * perm:
        return 0.0
    # face areas (times two)
    c1x, c1y, c1z = uy * vz - uz * vy, uz * vx - ux * vz, ux * vy - uy * vx
    c2x, c2y, c2z = uy * wz - uz * wy, uz * wx - ux * wz, ux * wy - uy * wx
    c3x, c3y, c3z = t1 - t2, t3 - t4, t5 - t6
    px, py, pz = cx - bx, cy - by, cz - bz
    qx, qy, qz = dx - bx, dy - by, dz - bz
    c4x, c4y, c4z = py * qz - pz * qy, pz * qx - px * qz, px * qy - py * qx
    asum = math.sqrt(c1x * c1x + c1y * c1y + c1z * c1z) \
        + math.sqrt(c2x * c2x + c2y * c2y + c2z * c2z) \
        + math.sqrt(c3x * c3x + c3y * c3y + c3z * c3z) \
        + math.sqrt(c4x * c4x + c4y * c4y + c4z * c4z)
    # longest edge
    e = ux * ux + uy * uy + uz * uz
    l2 = vx * vx + vy * vy + vz * vz
    if l2 > e:
        e = l2
    l2 = wx * wx + wy * wy + wz * wz
    if l2 > e:
        e = l2
    l2 = px * px + py * py + pz * pz
    if l2 > e:
        e = l2
    l2 = qx * qx + qy * qy + qz * qz
    if l2 > e:
        e = l2
    rx, ry, rz = dx - cx, dy - cy, dz - cz
    l2 = rx * rx + ry * ry + rz * rz
    if l2 > e:
        e = l2
    return SQRT24 * det / (math.sqrt(e) * asum)


@njit(cache=True, nogil=True)
def tet_gamma(points, a, b, c, d):
    return gamma_xyz(points[a, 0], points[a, 1], points[a, 2],
                     points[b, 0], points[b, 1], points[b, 2],
                     points[c, 0], points[c, 1], points[c, 2],
                     points[d, 0], points[d, 1], points[d, 2])


@njit(cache=True, nogil=True)
def batch_gamma(points, tets):
    out = np.empty(tets.shape[0])
    for i in range(tets.shape[0]):
        out[i] = tet_gamma(points, tets[i, 0], tets[i, 1], tets[i, 2], tets[i, 3])
    return out


@njit(cache=True, nogil=True)
def star_min_gamma(points, star, v, x, y, z):
    """Minimum gamma over ``star`` tetrahedra with vertex ``v`` placed at (x, y, z)."""
    best = np.inf
    for i in range(star.shape[0]):
        coords = np.empty(12)
        for k in range(4):
            w = star[i, k]
            if w == v:
                coords[3 * k] = x
                coords[3 * k + 1] = y
                coords[3 * k + 2] = z
            else:
                coords[3 * k] = points[w, 0]
                coords[3 * k + 1] = points[w, 1]
                coords[3 * k + 2] = points[w, 2]
        q = gamma_xyz(coords[0], coords[1], coords[2], coords[3], coords[4], coords[5],
                      coords[6], coords[7], coords[8], coords[9], coords[10], coords[11])
        if q < best:
            best = q
            if best <= 0.0:
                return best
    return best


@njit(cache=True, nogil=True)
def ring_triangle_gamma(points, a, b, ring, tris):
    """Per-triangle min(gamma(upper), gamma(lower)) of a sandwiched triangulation.

    The ring must run so that ``a`` is on the positive side of every ring
    triangle ``(i, j, k)`` with ``i < j < k``.
    """
    out = np.empty(tris.shape[0])
    for t in range(tris.shape[0]):
        ri = ring[tris[t, 0]]
        rj = ring[tris[t, 1]]
        rk = ring[tris[t, 2]]
        up = tet_gamma(points, ri, rj, rk, a)
        lo = tet_gamma(points, ri, rk, rj, b)
        out[t] = up if up < lo else lo
    return out


@njit(cache=True, nogil=True)
def orient_filter(ax, ay, az, bx, by, bz, cx, cy, cz, dx, dy, dz):
    """Sign of the orientation determinant, or 0 when the filter cannot tell."""
    ux, uy, uz = bx - ax, by - ay, bz - az
    vx, vy, vz = cx - ax, cy - ay, cz - az
    wx, wy, wz = dx - ax, dy - ay, dz - az
    t1 = vy * wz
    t2 = vz * wy
    t3 = vz * wx
    t4 = vx * wz
    t5 = vx * wy
    t6 = vy * wx
    det = ux * (t1 - t2) + uy * (t3 - t4) + uz * (t5 - t6)
    perm = (abs(t1) + abs(t2)) * abs(ux) + (abs(t3) + abs(t4)) * abs(uy) \
        + (abs(t5) + abs(t6)) * abs(uz)
    if det > _ERRBOUND * perm:
        return 1
    if -det > _ERRBOUND * perm:
        return -1
    return 0


@njit(cache=True, nogil=True)
def apex_gamma(xyz, a, b, c, start, n, out):
    """Gamma of ``(a, c, b, p)`` for ``p`` in ``[start, n)``; the facet
    ``(a, b, c)`` faces away from the apexes it is closed with."""
    for p in range(start, n):
        if p == a or p == b or p == c:
            out[p] = 0.0
            continue
        out[p] = gamma_xyz(xyz[a, 0], xyz[a, 1], xyz[a, 2],
                           xyz[c, 0], xyz[c, 1], xyz[c, 2],
                           xyz[b, 0], xyz[b, 1], xyz[b, 2],
                           xyz[p, 0], xyz[p, 1], xyz[p, 2])


@njit(cache=True, nogil=True)
def _orient_idx(xyz, i, j, k, l):
    return orient_filter(xyz[i, 0], xyz[i, 1], xyz[i, 2], xyz[j, 0], xyz[j, 1], xyz[j, 2],
                         xyz[k, 0], xyz[k, 1], xyz[k, 2], xyz[l, 0], xyz[l, 1], xyz[l, 2])


@njit(cache=True, nogil=True)
def empty_scan(xyz, a, b, c, d, start, n):
    """Scan points ``[start, n)`` against the positive tetrahedron ``abcd``.

    Returns ``(status, p)``: status 1 when every point is certainly outside,
    -1 when point ``p`` certainly lies inside, 0 when the filter could not
    decide point ``p``.
    """
    for p in range(start, n):
        if p == a or p == b or p == c or p == d:
            continue
        s0 = _orient_idx(xyz, p, b, c, d)
        if s0 < 0:
            continue
        s1 = _orient_idx(xyz, a, p, c, d)
        if s1 < 0:
            continue
        s2 = _orient_idx(xyz, a, b, p, d)
        if s2 < 0:
            continue
        s3 = _orient_idx(xyz, a, b, c, p)
        if s3 < 0:
            continue
        if s0 > 0 and s1 > 0 and s2 > 0 and s3 > 0:
            return -1, p
        return 0, p
    return 1, n
