"""Small mesh builders shared by the tests."""

import math

import numpy as np

from oracles import exact_orient
from tetimprove.mesh import TetMesh


def orient_rows(points, tets):
    """Swap two vertices of every negatively oriented row."""
    out = []
    for t in tets:
        t = list(t)
        if exact_orient(*(points[i] for i in t)) < 0:
            t[0], t[1] = t[1], t[0]
        out.append(t)
    return out


def mesh_of(points, tets, surface=None):
    points = np.asarray(points, dtype=float)
    return TetMesh(points, orient_rows(points, tets), surface=surface)


def bipyramid(h=0.05, r=1.0):
    """Triangle 0,1,2 with apexes 3 above and 4 below its centroid at height ``h``.

    The two flat tetrahedra are poor; the three around edge 3-4 are better.
    """
    pts = [[r * math.cos(a), r * math.sin(a), 0.0]
           for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3)]
    pts += [[0.0, 0.0, h], [0.0, 0.0, -h]]
    return mesh_of(pts, [(0, 1, 2, 3), (0, 1, 2, 4)])


def cube_cell():
    """The unit cube split into six tetrahedra around its main diagonal."""
    pts = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=float)
    tets = []
    for path in ((4, 6), (4, 5), (2, 6), (2, 3), (1, 5), (1, 3)):
        tets.append((0, path[0], path[1], 7))
    return mesh_of(pts, tets)


def ring_mesh(ring_xy, za=1.0, zb=-1.0, apex_xy=(0.0, 0.0)):
    """Tetrahedra around the edge (a, b) through the polygon ``ring_xy``.

    Vertex 0 is the upper apex ``a``, vertex 1 the lower apex ``b``, the ring
    follows. The ring must wind counter-clockwise around the apex column.
    """
    pts = [[apex_xy[0], apex_xy[1], za], [apex_xy[0], apex_xy[1], zb]]
    pts += [[x, y, z] for x, y, z in ring_xy]
    n = len(ring_xy)
    tets = [(0, 1, 2 + i, 2 + (i + 1) % n) for i in range(n)]
    return mesh_of(pts, tets)
