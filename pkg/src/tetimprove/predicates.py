"""Robust orientation predicate.

A floating-point filter answers almost every query; when the determinant is
too close to zero for the filter to be trusted, the determinant is evaluated
exactly with floating-point expansion arithmetic (Dekker/Knuth error-free
transformations), so the returned sign is always exact.
"""

from fractions import Fraction

EPSILON = 2.0 ** -53
SPLITTER = 2.0 ** 27 + 1.0
O3D_ERRBOUND_A = (7.0 + 56.0 * EPSILON) * EPSILON


def _two_sum(a, b):
    x = a + b
    bvirt = x - a
    avirt = x - bvirt
    return x, (a - avirt) + (b - bvirt)


def _split(a):
    c = SPLITTER * a
    abig = c - a
    ahi = c - abig
    return ahi, a - ahi


def _two_product(a, b):
    x = a * b
    ahi, alo = _split(a)
    bhi, blo = _split(b)
    err3 = alo * blo - (((x - ahi * bhi) - alo * bhi) - ahi * blo)
    return x, err3


def _grow_expansion(e, b):
    # e is nonoverlapping, increasing magnitude; zero components dropped
    h = []
    q = b
    for enow in e:
        q, hh = _two_sum(q, enow)
        if hh != 0.0:
            h.append(hh)
    if q != 0.0 or not h:
        h.append(q)
    return h


def expansion_sum(e, f):
    h = list(e)
    for fnow in f:
        h = _grow_expansion(h, fnow)
    return h


def scale_expansion(e, b):
    h = []
    bhi, blo = _split(b)
    q = None
    for enow in e:
        p = enow * b
        ehi, elo = _split(enow)
        perr = elo * blo - (((p - ehi * bhi) - elo * bhi) - ehi * blo)
        if q is None:
            q, hh = p, perr
        else:
            s, hh = _two_sum(q, perr)
            if hh != 0.0:
                h.append(hh)
            q, hh = p + s, s - ((p + s) - p)
            # fast_two_sum(p, s): |p| >= |s| is guaranteed by construction
        if hh != 0.0:
            h.append(hh)
    if q is not None and (q != 0.0 or not h):
        h.append(q)
    return h or [0.0]


def expansion_sign(e):
    for v in reversed(e):
        if v > 0.0:
            return 1
        if v < 0.0:
            return -1
    return 0


def _cross_minor(py, pz, qy, qz):
    """Exact expansion of py*qz - pz*qy."""
    x1, y1 = _two_product(py, qz)
    x2, y2 = _two_product(pz, qy)
    return expansion_sum([y1, x1], [-y2, -x2])


def _det3_exact(p, q, r):
    """Exact expansion of det([p, q, r]) for rows p, q, r."""
    m0 = _cross_minor(q[1], q[2], r[1], r[2])
    m1 = _cross_minor(q[0], q[2], r[0], r[2])
    m2 = _cross_minor(q[0], q[1], r[0], r[1])
    t0 = scale_expansion(m0, p[0])
    t1 = scale_expansion(m1, -p[1])
    t2 = scale_expansion(m2, p[2])
    return expansion_sum(expansion_sum(t0, t1), t2)


def orient3d_exact(a, b, c, d):
    """Exact sign of det[b - a, c - a, d - a] without rounding anywhere."""
    # det[b-a, c-a, d-a] = M_a - M_b + M_c - M_d, M_x the 3x3 det of the other rows
    ma = _det3_exact(b, c, d)
    mb = _det3_exact(a, c, d)
    mc = _det3_exact(a, b, d)
    md = _det3_exact(a, b, c)
    total = expansion_sum(ma, [-v for v in mb])
    total = expansion_sum(total, mc)
    total = expansion_sum(total, [-v for v in md])
    return expansion_sign(total)


def orient3d_filtered(a, b, c, d):
    """Floating-point determinant and its forward error bound."""
    ux, uy, uz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    vx, vy, vz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    wx, wy, wz = d[0] - a[0], d[1] - a[1], d[2] - a[2]
    t1 = vy * wz
    t2 = vz * wy
    t3 = vz * wx
    t4 = vx * wz
    t5 = vx * wy
    t6 = vy * wx
    det = ux * (t1 - t2) + uy * (t3 - t4) + uz * (t5 - t6)
    permanent = (
        (abs(t1) + abs(t2)) * abs(ux)
        + (abs(t3) + abs(t4)) * abs(uy)
        + (abs(t5) + abs(t6)) * abs(uz)
    )
    return det, O3D_ERRBOUND_A * permanent


# Products of three coordinates inside this range neither overflow nor
# lose their rounding errors to underflow, which the filter and the
# expansion arithmetic both rely on.
_SAFE_LO = 2.0 ** -250
_SAFE_HI = 2.0 ** 250


def _in_safe_range(*pts):
    for p in pts:
        for x in p:
            ax = abs(x)
            if ax != 0.0 and (ax < _SAFE_LO or ax > _SAFE_HI):
                return False
    return True


def _orient3d_rational(a, b, c, d):
    a, b, c, d = ([Fraction(x) for x in p] for p in (a, b, c, d))
    u = [b[i] - a[i] for i in range(3)]
    v = [c[i] - a[i] for i in range(3)]
    w = [d[i] - a[i] for i in range(3)]
    det = (u[0] * (v[1] * w[2] - v[2] * w[1]) - u[1] * (v[0] * w[2] - v[2] * w[0])
           + u[2] * (v[0] * w[1] - v[1] * w[0]))
    return (det > 0) - (det < 0)


def orient3d(a, b, c, d):
    """Return the exact sign (+1, 0, -1) of the orientation of ``abcd``.

    Positive when ``d`` lies on the side of the plane ``abc`` that the
    right-handed normal ``(b - a) x (c - a)`` points to; the corner
    tetrahedron ``(0,0,0), (1,0,0), (0,1,0), (0,0,1)`` is positive.
    """
    a = tuple(float(v) for v in a)
    b = tuple(float(v) for v in b)
    c = tuple(float(v) for v in c)
    d = tuple(float(v) for v in d)
    if not _in_safe_range(a, b, c, d):
        return _orient3d_rational(a, b, c, d)
    det, bound = orient3d_filtered(a, b, c, d)
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return orient3d_exact(a, b, c, d)
