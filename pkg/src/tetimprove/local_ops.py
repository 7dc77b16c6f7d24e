"""Fast local improvements: 2-3/3-2 flips, edge removal and smoothing."""

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import _kernels
from .exceptions import BoundaryVertex, ConstrainedFacet, NotAdjacent
from .mesh import extract_cavity, replace_cavity, _permutation_parity
from .predicates import orient3d
from .quality import FACES

__all__ = [
    "EdgeRing",
    "TriangulationTable",
    "build_triangulation_tables",
    "get_edge_ring",
    "flip_2_3",
    "flip_3_2",
    "edge_removal",
    "smooth_vertex",
    "MAX_RING",
]

MAX_RING = 7
SMOOTH_EPS = 1e-12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class EdgeRing:
    """Tetrahedra around an interior edge ``(a, b)``.

    ``ring`` is oriented so that ``a`` lies on the positive side of the ring
    polygon; ``ring_tets[i]`` spans ``ring[i], ring[i+1]``.
    """

    edge: tuple
    ring: list
    ring_tets: list

    @property
    def n(self):
        return len(self.ring)


@dataclass
class TriangulationTable:
    """All triangulations of convex N-gons, N = 3..7.

    ``triangulations[n]`` lists triangulations as tuples of sorted index
    triples; ``triangles[n]`` lists every triple of ``range(n)`` and
    ``masks[n][k]`` is the bitmask of triangulations containing
    ``triangles[n][k]``.
    """

    triangulations: dict
    triangles: dict
    masks: dict
    tri_arrays: dict


def _polygon_triangulations(verts):
    # the triangle on edge (verts[0], verts[-1]) picks an apex; recurse on both sides
    if len(verts) < 3:
        return [()]
    out = []
    first, last = verts[0], verts[-1]
    for k in range(1, len(verts) - 1):
        apex = verts[k]
        for left in _polygon_triangulations(verts[: k + 1]):
            for right in _polygon_triangulations(verts[k:]):
                out.append(left + ((first, apex, last),) + right)
    return out


@lru_cache(maxsize=None)
def build_triangulation_tables(max_n=MAX_RING):
    triangulations, triangles, masks, tri_arrays = {}, {}, {}, {}
    for n in range(3, max_n + 1):
        tris = sorted(tuple(sorted(t)) for t in combinations(range(n), 3))
        index = {t: i for i, t in enumerate(tris)}
        tlist = [tuple(sorted(tuple(sorted(t)) for t in tr))
                 for tr in _polygon_triangulations(tuple(range(n)))]
        tlist.sort()
        m = [0] * len(tris)
        for j, tr in enumerate(tlist):
            for t in tr:
                m[index[t]] |= 1 << j
        triangulations[n] = tlist
        triangles[n] = tris
        masks[n] = m
        tri_arrays[n] = np.array(tris, dtype=np.int64)
    return TriangulationTable(triangulations, triangles, masks, tri_arrays)


def get_edge_ring(mesh, a, b):
    """The :class:`EdgeRing` of edge ``ab``, or ``None`` when the edge is
    missing, lies on the domain boundary, or has a constrained facet."""
    walked = mesh.edge_ring(a, b)
    if walked is None:
        return None
    ring, ring_tets, closed = walked
    if not closed:
        return None
    for t in ring_tets:
        row = mesh.tets[t].tolist()
        for i in range(4):
            if row[i] != a and row[i] != b and mesh.constrained[t, i]:
                return None
    # orient so that orient3d(a, b, r0, r1) < 0, i.e. a above the ring polygon
    row = mesh.tets[ring_tets[0]].tolist()
    if _permutation_parity([a, b, ring[0], ring[1]], row) > 0:
        ring = ring[::-1]
        ring_tets = ring_tets[::-1]
        ring_tets = ring_tets[1:] + ring_tets[:1]
    return EdgeRing((a, b), list(ring), list(ring_tets))


def _all_positive(mesh, tets):
    for t in tets:
        p = mesh.points[list(t)]
        if orient3d(p[0], p[1], p[2], p[3]) <= 0:
            return False
    return True


def _sandwich_tets(er, triangulation):
    a, b = er.edge
    r = er.ring
    out = []
    for i, j, k in triangulation:
        out.append((r[i], r[j], r[k], a))
        out.append((r[i], r[k], r[j], b))
    return out


def edge_removal(mesh, a, b, tables=None, ring=None, log=None):
    """Remove edge ``ab`` if some sandwiched triangulation improves quality.

    Returns True when the mesh was modified.
    """
    er = ring if ring is not None else get_edge_ring(mesh, a, b)
    if er is None or er.n < 3 or er.n > MAX_RING:
        return False
    tables = tables or build_triangulation_tables()
    n = er.n
    q_old = float(mesh.quality[er.ring_tets].min())
    tri_q = _kernels.ring_triangle_gamma(
        mesh.points, er.edge[0], er.edge[1],
        np.asarray(er.ring, dtype=np.int64), tables.tri_arrays[n])
    masks = tables.masks[n]
    alive = (1 << len(tables.triangulations[n])) - 1
    for k in range(len(masks)):
        if tri_q[k] <= q_old:
            alive &= ~masks[k]
            if not alive:
                return False
    index = {t: k for k, t in enumerate(tables.triangles[n])}
    best, best_q = None, q_old
    for j, tr in enumerate(tables.triangulations[n]):
        if not (alive >> j) & 1:
            continue
        q = min(tri_q[index[t]] for t in tr)
        if q > best_q:
            best, best_q = tr, q
    if best is None:
        return False
    new_tets = _sandwich_tets(er, best)
    if not _all_positive(mesh, new_tets):
        return False
    cav = extract_cavity(mesh, er.ring_tets)
    replace_cavity(mesh, cav, new_tets)
    if log is not None:
        log.append(("edge_removal", q_old, best_q))
    return True


def flip_3_2(mesh, edge_ring, log=None):
    """Replace the three tetrahedra around an edge by two, if that improves."""
    er = edge_ring
    if er is None or er.n != 3:
        return False
    a, b = er.edge
    r0, r1, r2 = er.ring
    new_tets = [(r0, r1, r2, a), (r0, r2, r1, b)]
    q_old = float(mesh.quality[er.ring_tets].min())
    q_new = min(_kernels.tet_gamma(mesh.points, *t) for t in new_tets)
    if not q_new > q_old or not _all_positive(mesh, new_tets):
        return False
    cav = extract_cavity(mesh, er.ring_tets)
    replace_cavity(mesh, cav, new_tets)
    if log is not None:
        log.append(("flip_3_2", q_old, q_new))
    return True


def flip_2_3(mesh, tet_a, tet_b, log=None):
    """Replace two face-adjacent tetrahedra by three around the apex edge."""
    row_a = mesh.tets[tet_a].tolist()
    nb = mesh.neigh[tet_a].tolist()
    if tet_b not in nb or mesh.deleted[tet_a] or mesh.deleted[tet_b]:
        raise NotAdjacent(f"tetrahedra {tet_a} and {tet_b} do not share a facet")
    i = nb.index(tet_b)
    if mesh.constrained[tet_a, i]:
        raise ConstrainedFacet("shared facet belongs to the constrained surface")
    d = row_a[i]
    p, q, r = (row_a[k] for k in FACES[i])  # outward from tet_a, e is beyond it
    row_b = mesh.tets[tet_b].tolist()
    e = [v for v in row_b if v not in (p, q, r)][0]
    # (p, q, r) is outward from tet_a: d lies below it, e above
    new_tets = [(p, q, d, e), (q, r, d, e), (r, p, d, e)]
    q_old = float(min(mesh.quality[tet_a], mesh.quality[tet_b]))
    q_new = min(_kernels.tet_gamma(mesh.points, *t) for t in new_tets)
    if not q_new > q_old or not _all_positive(mesh, new_tets):
        return False
    cav = extract_cavity(mesh, [tet_a, tet_b])
    replace_cavity(mesh, cav, new_tets)
    if log is not None:
        log.append(("flip_2_3", q_old, q_new))
    return True


def smooth_vertex(mesh, v, star=None, log=None, tol=1e-3, max_iter=20):
    """Move ``v`` along the segment to its neighbours' centroid.

    Golden-section search maximises the worst incident quality over the
    segment; the move is kept only if it beats the current position by more
    than ``SMOOTH_EPS``.
    """
    if mesh.on_boundary[v]:
        raise BoundaryVertex(f"vertex {v} lies on the constrained surface")
    if star is None:
        star = mesh.star(v)
    if not star:
        return False
    star_arr = mesh.tets[star]
    nbrs = np.unique(star_arr)
    nbrs = nbrs[nbrs != v]
    x0 = mesh.points[v].copy()
    c = mesh.points[nbrs].mean(axis=0)
    d = c - x0
    pts = mesh.points

    def f(t):
        x = x0 + t * d
        return _kernels.star_min_gamma(pts, star_arr, v, x[0], x[1], x[2])

    f0 = float(mesh.quality[star].min())
    best_t, best_f = 0.0, f0
    fc = f(1.0)
    if fc > best_f:
        best_t, best_f = 1.0, fc
    lo, hi = 0.0, 1.0
    t1 = hi - _INVPHI * (hi - lo)
    t2 = lo + _INVPHI * (hi - lo)
    f1, f2 = f(t1), f(t2)
    for _ in range(max_iter):
        if f1 > best_f:
            best_t, best_f = t1, f1
        if f2 > best_f:
            best_t, best_f = t2, f2
        if hi - lo < tol:
            break
        if f1 >= f2:
            hi, t2, f2 = t2, t1, f1
            t1 = hi - _INVPHI * (hi - lo)
            f1 = f(t1)
        else:
            lo, t1, f1 = t1, t2, f2
            t2 = lo + _INVPHI * (hi - lo)
            f2 = f(t2)
    if not best_f > f0 + SMOOTH_EPS:
        return False
    x = x0 + best_t * d
    mesh.points[v] = x
    for t in star:
        p = mesh.points[mesh.tets[t]]
        if orient3d(p[0], p[1], p[2], p[3]) <= 0:
            mesh.points[v] = x0
            return False
    mesh.refresh_quality(star)
    if log is not None:
        log.append(("smooth", f0, best_f))
    return True
