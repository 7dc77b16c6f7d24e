"""Tetrahedral mesh data model, adjacency and cavity replacement."""

import threading
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import (
    DisconnectedSeed,
    InvalidMesh,
    NonManifoldFacet,
    OpenShell,
    OrientationViolation,
    ShellMismatch,
    VolumeMismatch,
)
from .predicates import orient3d
from .quality import FACES

__all__ = [
    "TetMesh",
    "Cavity",
    "build_adjacency",
    "extract_cavity",
    "replace_cavity",
    "get_bad_tetrahedra",
    "canonical_face",
    "FACES",
]

VOLUME_RTOL = 1e-9
_FACES_ARR = np.array(FACES)


def canonical_face(face):
    """Rotate an oriented triangle so its smallest vertex comes first."""
    a, b, c = face
    if a < b and a < c:
        return (a, b, c)
    if b < c:
        return (b, c, a)
    return (c, a, b)


def _permutation_parity(seq, ref):
    """+1 if ``seq`` is an even permutation of ``ref``, -1 otherwise."""
    perm = [ref.index(v) for v in seq]
    parity = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                parity = -parity
    return parity


def _face_keys(faces, n_points):
    s = np.sort(faces, axis=1).astype(np.int64)
    return (s[:, 0] * n_points + s[:, 1]) * n_points + s[:, 2]


class TetMesh:
    """A tetrahedral mesh with facet adjacency and a constrained surface.

    Tetrahedra live in flat, growable arrays. Deleted tetrahedra are
    tombstoned and reclaimed by :meth:`compact`, so indices stay stable
    between compactions.

    Parameters
    ----------
    points : array_like, shape (n, 3)
    tets : array_like, shape (m, 4)
        Zero-based vertex indices; every tetrahedron must be positively
        oriented.
    surface : array_like, shape (k, 3), optional
        Constrained surface triangles. When omitted, the boundary faces of
        the tetrahedralization are used.
    validate : bool
        Reject meshes with non-positive tetrahedra (exact test).
    """

    def __init__(self, points, tets, surface=None, validate=True):
        points = np.array(points, dtype=float, copy=True).reshape(-1, 3)
        tets = np.array(tets, dtype=np.int64, copy=True).reshape(-1, 4)
        if not np.all(np.isfinite(points)):
            raise InvalidMesh("vertex coordinates must be finite")
        if len(tets) and (tets.min() < 0 or tets.max() >= len(points)):
            raise InvalidMesh("tetrahedron references a vertex out of range")
        self.points = points
        self.n_points = len(points)
        cap = max(16, len(tets))
        self.tets = np.full((cap, 4), -1, dtype=np.int64)
        self.tets[: len(tets)] = tets
        self.neigh = np.full((cap, 4), -1, dtype=np.int64)
        self.constrained = np.zeros((cap, 4), dtype=bool)
        self.deleted = np.ones(cap, dtype=bool)
        self.deleted[: len(tets)] = False
        self.quality = np.zeros(cap)
        self.n_slots = len(tets)
        self.n_live = len(tets)
        self.vertex_tet = np.full(self.n_points, -1, dtype=np.int64)
        self.moore = np.zeros(self.n_points, dtype=np.uint64)
        self._lock = threading.Lock()
        self.frozen = False
        if validate:
            self._check_orientation(np.arange(len(tets)))
        if len(tets):
            self.quality[: len(tets)] = _kernels.batch_gamma(self.points, tets)
        build_adjacency(self)
        if surface is None:
            surface = self.boundary_faces()
        self._set_surface(np.asarray(surface, dtype=np.int64).reshape(-1, 3))
        self._refresh_vertex_tet()

    # -- construction helpers ------------------------------------------------

    def _check_orientation(self, idx):
        for t in idx:
            p = self.points[self.tets[t]]
            if orient3d(p[0], p[1], p[2], p[3]) <= 0:
                raise InvalidMesh(
                    f"tetrahedron {int(t)} {tuple(int(v) for v in self.tets[t])} "
                    "has non-positive volume"
                )

    def _set_surface(self, surface):
        self.surface = {tuple(sorted(int(v) for v in tri)) for tri in surface}
        self.on_boundary = np.zeros(self.n_points, dtype=bool)
        if len(surface):
            self.on_boundary[surface.ravel()] = True
        live = self.live_tets()
        self.constrained[:] = False
        if not self.surface or len(live) == 0:
            return
        faces = self.tets[live][:, _FACES_ARR].reshape(-1, 3)
        keys = _face_keys(faces, self.n_points)
        skeys = _face_keys(np.array(sorted(self.surface)), self.n_points)
        hit = np.isin(keys, skeys)
        missing = np.setdiff1d(skeys, keys)
        if len(missing):
            k = int(missing[0])
            n = self.n_points
            tri = (k // (n * n), (k // n) % n, k % n)
            raise InvalidMesh(f"surface triangle {tri} is not a face of any tetrahedron")
        self.constrained[live] = hit.reshape(-1, 4)

    def _refresh_vertex_tet(self):
        live = self.live_tets()
        self.vertex_tet[:] = -1
        for k in range(4):
            self.vertex_tet[self.tets[live, k]] = live

    # -- basic queries -------------------------------------------------------

    @property
    def n_tets(self):
        return self.n_live

    def live_tets(self):
        return np.flatnonzero(~self.deleted[: self.n_slots])

    def tet_array(self):
        """Vertex indices of live tetrahedra, in table order."""
        return self.tets[self.live_tets()].copy()

    def tet_points(self, t):
        return self.points[self.tets[t]]

    def boundary_faces(self):
        live = self.live_tets()
        sub = self.neigh[live]
        t_idx, f_idx = np.nonzero(sub < 0)
        tets = self.tets[live[t_idx]]
        return tets[np.arange(len(t_idx))[:, None], _FACES_ARR[f_idx]]

    def constrained_faces(self):
        """Set of sorted vertex triples of constrained faces of live tets."""
        live = self.live_tets()
        t_idx, f_idx = np.nonzero(self.constrained[live])
        tets = self.tets[live[t_idx]]
        faces = tets[np.arange(len(t_idx))[:, None], _FACES_ARR[f_idx]]
        return {tuple(sorted(int(v) for v in f)) for f in faces}

    def total_volume(self):
        live = self.live_tets()
        p = self.points[self.tets[live]]
        return float(np.linalg.det(p[:, 1:] - p[:, :1]).sum() / 6.0)

    def min_quality(self):
        live = self.live_tets()
        return float(self.quality[live].min()) if len(live) else float("inf")

    def refresh_quality(self, tets=None):
        idx = self.live_tets() if tets is None else np.asarray(tets, dtype=np.int64)
        if len(idx):
            self.quality[idx] = _kernels.batch_gamma(self.points, self.tets[idx])

    def star(self, v):
        """Live tetrahedra incident to vertex ``v``, ascending."""
        t0 = int(self.vertex_tet[v])
        if t0 < 0 or self.deleted[t0] or v not in self.tets[t0]:
            live = self.live_tets()
            hits = live[np.any(self.tets[live] == v, axis=1)]
            if len(hits) == 0:
                return []
            t0 = int(hits[0])
            self.vertex_tet[v] = t0
        tets, neigh = self.tets, self.neigh
        seen = {t0}
        stack = [t0]
        while stack:
            t = stack.pop()
            row = tets[t].tolist()
            nb = neigh[t].tolist()
            for i in range(4):
                if row[i] != v:
                    n = nb[i]
                    if n >= 0 and n not in seen:
                        seen.add(n)
                        stack.append(n)
        return sorted(seen)

    def vertex_neighbors(self, v, star=None):
        """Vertices sharing a mesh edge with ``v``."""
        if star is None:
            star = self.star(v)
        nb = set(self.tets[star].ravel().tolist())
        nb.discard(v)
        return sorted(nb)

    def edge_ring(self, a, b):
        """Walk the tetrahedra around edge ``ab``.

        Returns ``(ring, ring_tets, closed)`` where ``ring`` holds the link
        vertices in cyclic order and ``ring_tets[i]`` spans
        ``ring[i], ring[i+1]``. ``None`` if the edge does not exist.
        """
        start = -1
        for t in self.star(a):
            if b in self.tets[t]:
                start = t
                break
        if start < 0:
            return None
        row = self.tets[start].tolist()
        c, d = [v for v in row if v != a and v != b]
        ring = [c, d]
        ring_tets = [start]
        closed = False
        t = start
        prev_v = c
        cur_v = d
        while True:
            row = self.tets[t].tolist()
            n = int(self.neigh[t, row.index(prev_v)])
            if n < 0:
                break
            if n == start:
                closed = True
                break
            nrow = self.tets[n].tolist()
            new_v = [v for v in nrow if v not in (a, b, cur_v)][0]
            ring_tets.append(n)
            t = n
            prev_v, cur_v = cur_v, new_v
            ring.append(new_v)
            if len(ring) > 64:
                break
        if closed:
            ring.pop()  # last vertex repeats ring[0]
        else:
            # open ring: walk the other way to collect the full fan
            t = start
            prev_v, cur_v = d, c
            while True:
                row = self.tets[t].tolist()
                n = int(self.neigh[t, row.index(prev_v)])
                if n < 0:
                    break
                nrow = self.tets[n].tolist()
                new_v = [v for v in nrow if v not in (a, b, cur_v)][0]
                ring_tets.insert(0, n)
                ring.insert(0, new_v)
                t = n
                prev_v, cur_v = cur_v, new_v
        return ring, ring_tets, closed

    # -- mutation ------------------------------------------------------------

    def reserve(self, extra):
        """Make room for ``extra`` more tetrahedra without reallocating later."""
        need = self.n_slots + extra
        cap = len(self.tets)
        if need <= cap:
            return
        new_cap = max(need, int(cap * 1.5) + 16)

        def grow(arr, fill):
            out = np.full((new_cap,) + arr.shape[1:], fill, dtype=arr.dtype)
            out[:cap] = arr
            return out

        self.tets = grow(self.tets, -1)
        self.neigh = grow(self.neigh, -1)
        self.constrained = grow(self.constrained, False)
        self.deleted = grow(self.deleted, True)
        self.quality = grow(self.quality, 0.0)

    def free_capacity(self):
        return len(self.tets) - self.n_slots

    def _allocate(self, count):
        with self._lock:
            if self.free_capacity() < count:
                if self.frozen:
                    raise RuntimeError("tetrahedron storage is frozen during a parallel sweep")
                self.reserve(count)
            start = self.n_slots
            self.n_slots += count
            return start

    def compact(self):
        """Drop tombstones; returns the old-to-new index map (-1 for dead)."""
        live = self.live_tets()
        remap = np.full(len(self.tets), -1, dtype=np.int64)
        remap[live] = np.arange(len(live))
        n = len(live)
        cap = max(16, n)
        tets = np.full((cap, 4), -1, dtype=np.int64)
        neigh = np.full((cap, 4), -1, dtype=np.int64)
        constrained = np.zeros((cap, 4), dtype=bool)
        quality = np.zeros(cap)
        deleted = np.ones(cap, dtype=bool)
        tets[:n] = self.tets[live]
        old_neigh = self.neigh[live]
        neigh[:n] = np.where(old_neigh >= 0, remap[np.maximum(old_neigh, 0)], -1)
        constrained[:n] = self.constrained[live]
        quality[:n] = self.quality[live]
        deleted[:n] = False
        self.tets, self.neigh, self.constrained = tets, neigh, constrained
        self.quality, self.deleted = quality, deleted
        self.n_slots = n
        self.n_live = n
        self._refresh_vertex_tet()
        return remap

    def copy(self):
        out = TetMesh.__new__(TetMesh)
        out.__dict__.update({
            k: (v.copy() if isinstance(v, (np.ndarray, set)) else v)
            for k, v in self.__dict__.items() if k != "_lock"
        })
        out._lock = threading.Lock()
        return out

    def move_vertex(self, v, position, star=None):
        self.points[v] = position
        if star is None:
            star = self.star(v)
        self.refresh_quality(star)

    # -- audit -----------------------------------------------------------------

    def audit(self, exact=True):
        """Return a list of invariant violations (empty when consistent)."""
        problems = []
        live = self.live_tets()
        if len(live) != self.n_live:
            problems.append(f"live count {self.n_live} != {len(live)} live slots")
        tets, neigh = self.tets, self.neigh
        for t in live.tolist():
            row = tets[t].tolist()
            for i in range(4):
                n = int(neigh[t, i])
                face = {row[j] for j in range(4) if j != i}
                if n < 0:
                    continue
                if self.deleted[n]:
                    problems.append(f"tet {t} links to deleted tet {n}")
                    continue
                nrow = tets[n].tolist()
                back = [j for j in range(4) if int(neigh[n, j]) == t]
                if len(back) != 1:
                    problems.append(f"tet {t} -> {n} link not symmetric")
                    continue
                j = back[0]
                nface = {nrow[k] for k in range(4) if k != j}
                if nface != face:
                    problems.append(f"tets {t},{n} disagree on shared facet")
                if self.constrained[t, i] != self.constrained[n, j]:
                    problems.append(f"constrained flag mismatch between {t} and {n}")
        # every facet owned at most twice, boundary facets unlinked
        faces = tets[live][:, _FACES_ARR].reshape(-1, 3)
        if len(faces):
            keys = _face_keys(faces, self.n_points)
            _, counts = np.unique(keys, return_counts=True)
            if counts.max() > 2:
                problems.append("a facet is shared by more than two tetrahedra")
            n_boundary = int((counts == 1).sum())
            if n_boundary != int((neigh[live] < 0).sum()):
                problems.append("boundary facet count does not match unlinked faces")
        if self.constrained_faces() != self.surface:
            problems.append("constrained surface triangles changed")
        if exact:
            # the filtered kernel is certain wherever it is nonzero
            q = _kernels.batch_gamma(self.points, tets[live])
            for t in live[q <= 0.0].tolist():
                p = self.points[tets[t]]
                if orient3d(p[0], p[1], p[2], p[3]) <= 0:
                    problems.append(f"tet {t} is not positively oriented")
        return problems

    def __repr__(self):
        return f"TetMesh(n_points={self.n_points}, n_tets={self.n_live})"


def build_adjacency(mesh):
    """Link facet-adjacent tetrahedra; faces are matched by sorted vertex triple."""
    live = mesh.live_tets()
    mesh.neigh[: mesh.n_slots] = -1
    if len(live) == 0:
        return mesh
    faces = mesh.tets[live][:, _FACES_ARR].reshape(-1, 3)
    keys = _face_keys(faces, mesh.n_points)
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    _, starts, counts = np.unique(sk, return_index=True, return_counts=True)
    bad = np.flatnonzero(counts > 2)
    if len(bad):
        f = faces[order[starts[bad[0]]]]
        raise NonManifoldFacet(sorted(int(v) for v in f))
    pairs = starts[counts == 2]
    first = order[pairs]
    second = order[pairs + 1]
    t1, f1 = live[first // 4], first % 4
    t2, f2 = live[second // 4], second % 4
    mesh.neigh[t1, f1] = t2
    mesh.neigh[t2, f2] = t1
    return mesh


@dataclass
class Cavity:
    """A face-connected set of tetrahedra and its outward boundary shell.

    ``links[i]`` describes what lies across ``boundary_facets[i]``:
    ``(outside_tet, outside_slot, constrained)`` with ``outside_tet == -1``
    on the domain boundary.
    """

    tets: list
    boundary_facets: list
    links: list
    interior_points: list
    all_points: list
    volume: float = 0.0
    quality: float = 0.0
    facet_index: dict = field(default_factory=dict)


def _shell_is_closed(facets):
    balance = {}
    for a, b, c in facets:
        for u, v in ((a, b), (b, c), (c, a)):
            balance[(u, v)] = balance.get((u, v), 0) + 1
            balance[(v, u)] = balance.get((v, u), 0) - 1
    return all(x == 0 for x in balance.values())


def _shell_volume(points, facets):
    if not facets:
        return 0.0
    tri = points[np.asarray(facets)]
    o = tri[0, 0]
    a, b, c = tri[:, 0] - o, tri[:, 1] - o, tri[:, 2] - o
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def extract_cavity(mesh, tets, require_connected=True):
    """Build the :class:`Cavity` of a set of live tetrahedra (mesh unmodified)."""
    tset = set(int(t) for t in tets)
    if not tset:
        raise DisconnectedSeed("empty tetrahedron set")
    for t in tset:
        if t < 0 or t >= mesh.n_slots or mesh.deleted[t]:
            raise DisconnectedSeed(f"tetrahedron {t} is not live")
    if require_connected:
        first = min(tset)
        seen = {first}
        stack = [first]
        while stack:
            t = stack.pop()
            for n in mesh.neigh[t].tolist():
                if n in tset and n not in seen:
                    seen.add(n)
                    stack.append(n)
        if len(seen) != len(tset):
            raise DisconnectedSeed("tetrahedra are not face-connected")
    facets, links = [], []
    pts = set()
    for t in sorted(tset):
        row = mesh.tets[t].tolist()
        pts.update(row)
        nb = mesh.neigh[t].tolist()
        for i in range(4):
            n = nb[i]
            if n in tset:
                continue
            f = FACES[i]
            facets.append((row[f[0]], row[f[1]], row[f[2]]))
            slot = -1
            if n >= 0:
                slot = mesh.neigh[n].tolist().index(t)
            links.append((n, slot, bool(mesh.constrained[t, i])))
    if not _shell_is_closed(facets):
        raise OpenShell("cavity boundary is not a closed surface")
    on_shell = {v for f in facets for v in f}
    tl = sorted(tset)
    vol = float(np.linalg.det(
        mesh.points[mesh.tets[tl]][:, 1:] - mesh.points[mesh.tets[tl]][:, :1]
    ).sum() / 6.0)
    return Cavity(
        tets=tl,
        boundary_facets=facets,
        links=links,
        interior_points=sorted(pts - on_shell),
        all_points=sorted(pts),
        volume=vol,
        quality=float(mesh.quality[tl].min()),
        facet_index={canonical_face(f): i for i, f in enumerate(facets)},
    )


def patch_boundary(new_tets):
    """Oriented boundary faces of a tet patch after cancelling shared faces."""
    chain = {}
    for tet in new_tets:
        for f in FACES:
            face = canonical_face((tet[f[0]], tet[f[1]], tet[f[2]]))
            opp = canonical_face((face[0], face[2], face[1]))
            if chain.get(opp, 0) > 0:
                chain[opp] -= 1
                if chain[opp] == 0:
                    del chain[opp]
            else:
                chain[face] = chain.get(face, 0) + 1
    return chain


def replace_cavity(mesh, cavity, new_tets, check=True):
    """Swap the cavity's tetrahedra for ``new_tets`` and relink adjacency.

    ``new_tets`` are global vertex 4-tuples, positively oriented. Returns
    the indices of the inserted tetrahedra.
    """
    new_tets = [tuple(int(v) for v in t) for t in new_tets]
    if check:
        allowed = set(cavity.all_points)
        for t in new_tets:
            if not allowed.issuperset(t):
                raise ShellMismatch(f"new tetrahedron {t} uses a point outside the cavity")
        vols = []
        for t in new_tets:
            p = mesh.points[list(t)]
            if orient3d(p[0], p[1], p[2], p[3]) <= 0:
                raise OrientationViolation(f"new tetrahedron {t} is not positively oriented")
            vols.append(np.linalg.det(p[1:] - p[0]) / 6.0)
        v_new = float(np.sum(vols))
        if abs(v_new - cavity.volume) > VOLUME_RTOL * abs(cavity.volume):
            raise VolumeMismatch(
                f"patch volume {v_new!r} differs from cavity volume {cavity.volume!r}"
            )
        chain = patch_boundary(new_tets)
        shell = {}
        for f in cavity.boundary_facets:
            cf = canonical_face(f)
            shell[cf] = shell.get(cf, 0) + 1
        if chain != shell:
            raise ShellMismatch("new patch boundary differs from the cavity shell")

    start = mesh._allocate(len(new_tets))
    idx = list(range(start, start + len(new_tets)))
    for t in cavity.tets:
        mesh.deleted[t] = True
    internal = {}
    for k, tet in zip(idx, new_tets):
        mesh.tets[k] = tet
        mesh.deleted[k] = False
        mesh.constrained[k] = False
        for i, f in enumerate(FACES):
            face = (tet[f[0]], tet[f[1]], tet[f[2]])
            cf = canonical_face(face)
            j = cavity.facet_index.get(cf)
            if j is not None:
                n, slot, flag = cavity.links[j]
                mesh.neigh[k, i] = n
                mesh.constrained[k, i] = flag
                if n >= 0:
                    mesh.neigh[n, slot] = k
                continue
            key = tuple(sorted(face))
            other = internal.pop(key, None)
            if other is None:
                internal[key] = (k, i)
                mesh.neigh[k, i] = -1
            else:
                mesh.neigh[k, i] = other[0]
                mesh.neigh[other[0], other[1]] = k
        for v in tet:
            mesh.vertex_tet[v] = k
    mesh.quality[idx] = _kernels.batch_gamma(mesh.points, mesh.tets[idx])
    with mesh._lock:
        mesh.n_live += len(new_tets) - len(cavity.tets)
    return idx


def get_bad_tetrahedra(mesh, q_min):
    """Live tetrahedra with cached quality below ``q_min``, by ascending index."""
    live = mesh.live_tets()
    return live[mesh.quality[live] < q_min].tolist()
