"""Element quality measures: gamma, SICN and dihedral angles.

Quality values use plain double precision; only the sign (validity) of a
near-flat element is settled by the exact orientation predicate.
"""

import math

import numpy as np

from . import _kernels
from .exceptions import DegenerateTet, EmptySet
from .predicates import orient3d

__all__ = [
    "gamma",
    "gamma_points",
    "sicn",
    "dihedral_angles",
    "cavity_quality",
    "batch_gamma",
    "batch_sicn",
    "batch_dihedral_angles",
    "signed_volume",
    "REFERENCE_EDGES",
]

# Edge matrix (columns) of the unit-edge regular tetrahedron.
REFERENCE_EDGES = np.array([
    [1.0, 0.5, 0.5],
    [0.0, math.sqrt(3.0) / 2.0, math.sqrt(3.0) / 6.0],
    [0.0, 0.0, math.sqrt(2.0 / 3.0)],
])
_REFERENCE_INV = np.linalg.inv(REFERENCE_EDGES)

# vertex pairs of the six edges, and the two vertices opposite each edge
EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_OPPOSITE = ((2, 3), (1, 3), (1, 2), (0, 3), (0, 2), (0, 1))

# outward faces of a positively oriented tet; face i is opposite vertex i
FACES = ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1))

_TINY = 1e-300


def _as_tet(tet):
    arr = np.asarray(tet, dtype=float)
    if arr.shape != (4, 3):
        raise ValueError(f"expected 4 points in 3D, got shape {arr.shape}")
    return arr


def gamma_points(a, b, c, d):
    """Gamma of the tetrahedron ``abcd`` given as four coordinate triples."""
    q = _kernels.gamma_xyz(a[0], a[1], a[2], b[0], b[1], b[2],
                           c[0], c[1], c[2], d[0], d[1], d[2])
    if q != 0.0:
        return q
    # inside the filter's error bound: settle validity exactly
    return orient3d(a, b, c, d) * _TINY


def gamma(tet):
    """Inradius-to-longest-edge quality, scaled so the regular tet scores 1.

    Parameters
    ----------
    tet : array_like, shape (4, 3)
        Vertex coordinates.

    Returns
    -------
    float
        ``sqrt(24) * 3V / (|e_max| * sum of face areas)`` with signed volume,
        so inverted elements score negative and flat ones zero.
    """
    p = _as_tet(tet)
    return gamma_points(p[0], p[1], p[2], p[3])


def signed_volume(tet):
    p = _as_tet(tet)
    return float(np.linalg.det(p[1:] - p[0])) / 6.0


def sicn(tet):
    """Signed inverse condition number (Frobenius norm) against the regular tet.

    With ``E`` the edge matrix of ``tet`` and ``R`` the regular reference,
    ``S = E R^-1`` and the result is ``sign(det S) * 3 / (|S|_F |S^-1|_F)``.
    ``|S^-1|_F`` is computed as ``|R adj(E)|_F / |det E|`` so a flat element
    evaluates to exactly 0 instead of dividing by zero.
    """
    p = _as_tet(tet)
    e = (p[1:] - p[0]).T
    s = orient3d(p[0], p[1], p[2], p[3])
    if s == 0:
        return 0.0
    det = np.linalg.det(e)
    adj = np.array([
        np.cross(e[:, 1], e[:, 2]),
        np.cross(e[:, 2], e[:, 0]),
        np.cross(e[:, 0], e[:, 1]),
    ])  # rows: adj(E) = det(E) * inv(E)
    norm_s = np.linalg.norm(e @ _REFERENCE_INV)
    norm_adj = np.linalg.norm(REFERENCE_EDGES @ adj)
    if norm_s == 0.0 or norm_adj == 0.0:
        return 0.0
    value = 3.0 * abs(det) / (norm_s * norm_adj)
    return s * min(value, 1.0)


def _face_normals(p):
    return [np.cross(p[f[1]] - p[f[0]], p[f[2]] - p[f[0]]) for f in FACES]


def dihedral_angles(tet):
    """The six interior dihedral angles in degrees, ordered like ``EDGES``."""
    p = _as_tet(tet)
    if orient3d(p[0], p[1], p[2], p[3]) == 0:
        raise DegenerateTet("zero-volume tetrahedron has no dihedral angles")
    normals = _face_normals(p)
    out = np.empty(6)
    for i, (k, l) in enumerate(_OPPOSITE):
        nk, nl = normals[k], normals[l]
        c = -float(np.dot(nk, nl)) / (np.linalg.norm(nk) * np.linalg.norm(nl))
        out[i] = math.degrees(math.acos(max(-1.0, min(1.0, c))))
    return out


def cavity_quality(qualities):
    """Quality of a set of tetrahedra, i.e. its worst member."""
    values = list(qualities)
    if not values:
        raise EmptySet("cavity quality of an empty set is undefined")
    return min(values)


# -- vectorised versions over a whole mesh ---------------------------------

def batch_gamma(points, tets):
    tets = np.ascontiguousarray(tets, dtype=np.int64)
    if len(tets) == 0:
        return np.empty(0)
    return _kernels.batch_gamma(np.ascontiguousarray(points, dtype=float), tets)


def _edge_matrices(points, tets):
    p = np.asarray(points, dtype=float)[np.asarray(tets)]
    return p, np.transpose(p[:, 1:] - p[:, :1], (0, 2, 1))


def batch_sicn(points, tets):
    if len(tets) == 0:
        return np.empty(0)
    _, e = _edge_matrices(points, tets)
    det = np.linalg.det(e)
    c0 = np.cross(e[:, :, 1], e[:, :, 2])
    c1 = np.cross(e[:, :, 2], e[:, :, 0])
    c2 = np.cross(e[:, :, 0], e[:, :, 1])
    adj = np.stack([c0, c1, c2], axis=1)
    norm_s = np.linalg.norm(e @ _REFERENCE_INV, axis=(1, 2))
    norm_adj = np.linalg.norm(REFERENCE_EDGES @ adj, axis=(1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.where(norm_s * norm_adj > 0, 3.0 * det / (norm_s * norm_adj), 0.0)
    return np.clip(value, -1.0, 1.0)


def batch_dihedral_angles(points, tets):
    if len(tets) == 0:
        return np.empty((0, 6))
    p, _ = _edge_matrices(points, tets)
    normals = [np.cross(p[:, f[1]] - p[:, f[0]], p[:, f[2]] - p[:, f[0]]) for f in FACES]
    out = np.empty((len(p), 6))
    for i, (k, l) in enumerate(_OPPOSITE):
        nk, nl = normals[k], normals[l]
        denom = np.linalg.norm(nk, axis=1) * np.linalg.norm(nl, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = -np.einsum("ij,ij->i", nk, nl) / denom
        out[:, i] = np.degrees(np.arccos(np.clip(np.nan_to_num(c, nan=1.0), -1.0, 1.0)))
    return out
