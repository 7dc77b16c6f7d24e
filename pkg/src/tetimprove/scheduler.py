"""Improvement schedule: SER and GSC sweeps over Moore-curve partitions."""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .gsc import Suspended, gsc
from .local_ops import MAX_RING, build_triangulation_tables, edge_removal, get_edge_ring, smooth_vertex
from .mesh import TetMesh, get_bad_tetrahedra
from .quality import EDGES
from .spr import DEFAULT_NODE_BUDGET, MAX_POINTS

__all__ = [
    "MOORE_ORDER",
    "Partition",
    "Partitioning",
    "SweepStats",
    "ImproveResult",
    "moore_index",
    "make_partitions",
    "next_worker_count",
    "improve",
    "reproducible_reorder",
]

MOORE_ORDER = 10
DEFAULT_THRESHOLD = 0.35

# slots reserved per pending bad tet before a parallel sweep, so storage
# never reallocates while workers hold references into it
_RESERVE_SER = 16
_RESERVE_GSC = 512


# -- Moore curve --------------------------------------------------------------

def _hilbert_index(X, bits):
    """Hilbert index of integer cells ``X`` (shape (n, 3)) with ``bits`` per axis.

    Skilling's transpose algorithm, vectorised over rows.
    """
    X = X.astype(np.uint64).copy()
    n = len(X)
    if bits == 0:
        return np.zeros(n, dtype=np.uint64)
    M = np.uint64(1 << (bits - 1))
    Q = M
    while Q > 1:
        P = Q - np.uint64(1)
        for i in range(3):
            hit = (X[:, i] & Q) != 0
            X[hit, 0] ^= P
            t = (X[:, 0] ^ X[:, i]) & P
            t[hit] = 0
            X[:, 0] ^= t
            X[:, i] ^= t
        Q >>= np.uint64(1)
    for i in range(1, 3):
        X[:, i] ^= X[:, i - 1]
    t = np.zeros(n, dtype=np.uint64)
    Q = M
    while Q > 1:
        hit = (X[:, 2] & Q) != 0
        t[hit] ^= Q - np.uint64(1)
        Q >>= np.uint64(1)
    X ^= t[:, None]
    h = np.zeros(n, dtype=np.uint64)
    one = np.uint64(1)
    for b in range(bits - 1, -1, -1):
        for i in range(3):
            h = (h << one) | ((X[:, i] >> np.uint64(b)) & one)
    return h


# closed cycle over the octants; consecutive octants share a face
_OCTANT_CYCLE = ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0),
                 (1, 1, 0), (1, 1, 1), (1, 0, 1), (1, 0, 0))
_SYMMETRIES = [(perm, flips) for perm in itertools.permutations(range(3))
               for flips in itertools.product((0, 1), repeat=3)]


def _apply_corner(sym, c):
    perm, flips = sym
    return tuple(flips[i] ^ c[perm[i]] for i in range(3))


@lru_cache(maxsize=None)
def _moore_layout(sub_bits):
    """Symmetry applied to the Hilbert sub-curve in each octant of the cycle.

    Entry and exit corners are chained so the exit cell of one octant is
    face-adjacent to the entry cell of the next, including the wrap-around.
    """
    if sub_bits == 0:
        return tuple((c, ((0, 1, 2), (0, 0, 0))) for c in _OCTANT_CYCLE)
    side = 1 << sub_bits
    corners = np.array(list(itertools.product((0, side - 1), repeat=3)))
    h = _hilbert_index(corners, sub_bits)
    start = tuple(int(x > 0) for x in corners[int(np.argmin(h))])
    end = tuple(int(x > 0) for x in corners[int(np.argmax(h))])
    if int(h.max()) != (1 << (3 * sub_bits)) - 1:
        raise RuntimeError("Hilbert curve does not end at a corner")

    def neighbours(c):
        return [tuple(c[i] ^ (i == j) for i in range(3)) for j in range(3)]

    def entry_after(k, c_out):
        o, o_next = _OCTANT_CYCLE[k], _OCTANT_CYCLE[(k + 1) % 8]
        j = [i for i in range(3) if o[i] != o_next[i]][0]
        # leaving octant o across axis j: must sit on the shared face
        if c_out[j] != 1 - o[j]:
            return None
        return tuple(1 - c_out[i] if i == j else c_out[i] for i in range(3))

    def search(k, c_in, chosen, first_in):
        for c_out in neighbours(c_in):
            nxt = entry_after(k, c_out)
            if nxt is None:
                continue
            if k == 7:
                if nxt == first_in:
                    return chosen + [(c_in, c_out)]
                continue
            got = search(k + 1, nxt, chosen + [(c_in, c_out)], first_in)
            if got:
                return got
        return None

    for c0 in itertools.product((0, 1), repeat=3):
        chain = search(0, c0, [], c0)
        if chain:
            break
    else:  # pragma: no cover
        raise RuntimeError("no closed octant chain")
    layout = []
    for k, (c_in, c_out) in enumerate(chain):
        sym = next(s for s in _SYMMETRIES
                   if _apply_corner(s, start) == c_in and _apply_corner(s, end) == c_out)
        layout.append((_OCTANT_CYCLE[k], sym))
    return tuple(layout)


def _moore_cells(cells, order):
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
    sub = order - 1
    octant = cells >> sub
    local = cells & ((1 << sub) - 1)
    side = (1 << sub) - 1
    out = np.zeros(len(cells), dtype=np.uint64)
    code = (octant[:, 0] << 2) | (octant[:, 1] << 1) | octant[:, 2]
    for k, (o, (perm, flips)) in enumerate(_moore_layout(sub)):
        rows = np.nonzero(code == ((o[0] << 2) | (o[1] << 1) | o[2]))[0]
        if len(rows) == 0:
            continue
        q = local[rows]
        x = np.empty_like(q)
        for i in range(3):
            x[:, perm[i]] = side - q[:, i] if flips[i] else q[:, i]
        out[rows] = np.uint64(k << (3 * sub)) + _hilbert_index(x, sub)
    return out


def moore_index(position, bbox, order=MOORE_ORDER):
    """Index of the cell holding ``position`` along a closed 3D Moore curve.

    Parameters
    ----------
    position : array_like, shape (3,) or (n, 3)
    bbox : (lo, hi)
        Box split into ``2**order`` cells per axis; positions outside it
        are clamped.
    order : int
        Bits per axis, at least 1.

    Returns
    -------
    numpy.uint64 or ndarray of uint64 in ``[0, 2**(3*order))``.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    pos = np.asarray(position, dtype=float)
    single = pos.ndim == 1
    pos = pos.reshape(-1, 3)
    lo = np.asarray(bbox[0], dtype=float)
    hi = np.asarray(bbox[1], dtype=float)
    ext = np.where(hi > lo, hi - lo, 1.0)
    n = 1 << order
    cells = np.floor((pos - lo) / ext * n)
    cells = np.clip(np.nan_to_num(cells), 0, n - 1).astype(np.int64)
    out = _moore_cells(cells, order)
    return out[0] if single else out


def _mesh_moore(mesh, order=MOORE_ORDER):
    pts = mesh.points[: mesh.n_points]
    mesh.moore = moore_index(pts, (pts.min(axis=0), pts.max(axis=0)), order)
    return mesh.moore


# -- partitions ---------------------------------------------------------------

@dataclass
class Partition:
    """Half-open Moore range ``[lo, hi)`` owned by one worker."""

    moore_range: tuple
    owned_bad_tets: int
    worker_id: int
    bad_tets: list = field(default_factory=list, repr=False)


@dataclass
class Partitioning:
    """Partitions plus the bad tetrahedra no partition owns.

    ``vertex_part[v]`` is the partition holding vertex ``v``; a tetrahedron
    belongs to a partition when at least three of its vertices do.
    """

    partitions: list
    suspended: list
    vertex_part: np.ndarray
    bounds: np.ndarray

    def __iter__(self):
        return iter(self.partitions)

    def __len__(self):
        return len(self.partitions)

    def __getitem__(self, i):
        return self.partitions[i]

    def owner(self, mesh, t):
        """Partition owning tetrahedron ``t``, or -1."""
        parts = self.vertex_part[mesh.tets[t]]
        vals, counts = np.unique(parts, return_counts=True)
        best = int(np.argmax(counts))
        return int(vals[best]) if counts[best] >= 3 else -1


def make_partitions(mesh, bad_tets, k, order=MOORE_ORDER):
    """Split the Moore range into ``k`` ranges holding similar bad-tet counts.

    Cuts fall at quantiles of each bad tetrahedron's second-smallest vertex
    key, the only key that lies in a range holding three of its vertices.
    """
    keys = _mesh_moore(mesh, order)
    full = np.uint64(1) << np.uint64(3 * order)
    bad = np.asarray(bad_tets, dtype=np.int64)
    k = max(1, int(k))
    if len(bad):
        bad_keys = np.sort(keys[mesh.tets[bad]], axis=1)[:, 1]
    else:
        bad_keys = np.zeros(0, dtype=np.uint64)
    srt = np.sort(bad_keys)
    cuts = [srt[(i * len(srt)) // k] if len(srt) else np.uint64(0) for i in range(1, k)]
    bounds = np.array([0] + [int(c) for c in cuts] + [int(full)], dtype=np.uint64)
    vertex_part = (np.searchsorted(bounds, keys, side="right") - 1).astype(np.int64)
    vertex_part = np.clip(vertex_part, 0, k - 1)
    partitions = [Partition((int(bounds[i]), int(bounds[i + 1])), 0, i) for i in range(k)]
    suspended = []
    if len(bad):
        vp = vertex_part[mesh.tets[bad]]
        cand = np.clip(np.searchsorted(bounds, bad_keys, side="right") - 1, 0, k - 1)
        owned = (vp == cand[:, None]).sum(axis=1) >= 3
        for t, p, ok in zip(bad.tolist(), cand.tolist(), owned.tolist()):
            if ok:
                partitions[p].bad_tets.append(t)
            else:
                suspended.append(t)
    for p in partitions:
        p.owned_bad_tets = len(p.bad_tets)
    return Partitioning(partitions, suspended, vertex_part, bounds)


# -- sweeps -------------------------------------------------------------------

@dataclass
class SweepStats:
    """Counters for one pass of one phase over a set of bad tetrahedra."""

    phase: str
    workers: int
    attempted: int = 0
    applied: int = 0
    suspended: int = 0

    @property
    def rho(self):
        return self.suspended / self.attempted if self.attempted else 0.0


def next_worker_count(k, rho, max_workers):
    """Fewer workers as the suspended fraction grows; one when all suspend."""
    return max(1, min(max_workers, int(np.floor(k * (1.0 - rho))) + (1 if rho < 1 else 0)))


class _Ownership:
    """Footprint checks for one worker of a parallel sweep."""

    def __init__(self, mesh, plan, pid):
        self.mesh, self.plan, self.pid = mesh, plan, pid

    def _count(self, t):
        return int(np.count_nonzero(self.plan.vertex_part[self.mesh.tets[t]] == self.pid))

    def owns(self, t):
        return self._count(t) >= 3

    def neighbor_ok(self, t):
        """Mine, or nobody's: unowned tetrahedra are never mutated."""
        return self.plan.owner(self.mesh, t) in (self.pid, -1)

    def require(self, tets):
        for t in tets:
            if not self.owns(t):
                raise Suspended(f"tetrahedron {t} is outside partition {self.pid}")

    def require_shell(self, tets):
        inside = set(tets)
        for t in tets:
            for n in self.mesh.neigh[t].tolist():
                if n >= 0 and n not in inside and not self.neighbor_ok(n):
                    raise Suspended(f"tetrahedron {n} is outside partition {self.pid}")


def _ser_tet(mesh, t, tables, ctx, log):
    """Smoothing on each vertex, then edge removal on each edge; first success wins."""
    row = mesh.tets[t].tolist()
    for v in row:
        if mesh.on_boundary[v]:
            continue
        star = mesh.star(v)
        if ctx is not None:
            ctx.require(star)
        if smooth_vertex(mesh, v, star=star, log=log):
            return True
    for i, j in EDGES:
        a, b = row[i], row[j]
        er = get_edge_ring(mesh, a, b)
        if er is None or er.n > MAX_RING:
            continue
        if ctx is not None:
            ctx.require(er.ring_tets)
            ctx.require_shell(er.ring_tets)
        if edge_removal(mesh, a, b, tables, ring=er, log=log):
            return True
    return False


def _gsc_tet(mesh, t, ctx, log, max_points, node_budget):
    if ctx is None:
        return gsc(mesh, t, max_points=max_points, node_budget=node_budget, log=log)
    return gsc(mesh, t, max_points=max_points, node_budget=node_budget,
               owns=ctx.owns, neighbor_ok=ctx.neighbor_ok, log=log)


@dataclass
class ImproveResult:
    """What :func:`improve` did: per-sweep counters and the operation log.

    ``log`` entries are ``(kind, q_before, q_after)`` with the worst quality
    of the replaced region before and after each applied operation.
    """

    bad_before: int
    bad_after: int
    sweeps: list = field(default_factory=list)
    log: list = field(default_factory=list)
    modifications: int = 0


class _Scheduler:
    def __init__(self, mesh, q_min, max_workers, max_points, node_budget, check):
        self.mesh = mesh
        self.q_min = q_min
        self.max_workers = max(1, int(max_workers))
        self.k = self.max_workers
        self.max_points = max_points
        self.node_budget = node_budget
        self.check = check
        self.tables = build_triangulation_tables()
        self.sweeps = []
        self.log = []
        self.pool = ThreadPoolExecutor(self.max_workers) if self.max_workers > 1 else None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def _op(self, phase, t, ctx, log):
        if phase == "SER":
            return _ser_tet(self.mesh, t, self.tables, ctx, log)
        return _gsc_tet(self.mesh, t, ctx, log, self.max_points, self.node_budget)

    def _work(self, phase, items, ctx):
        mesh, log = self.mesh, []
        attempted = applied = 0
        suspended = []
        for t in items:
            if mesh.deleted[t] or not mesh.quality[t] < self.q_min:
                continue
            attempted += 1
            if ctx is None:
                applied += self._op(phase, t, None, log)
                continue
            try:
                applied += self._op(phase, t, ctx, log)
            except Suspended:
                suspended.append(t)
            except (IndexError, ValueError):
                # footprint walked through a region another worker was
                # rewriting; the read was stale, so retry later
                suspended.append(t)
        return attempted, applied, suspended, log

    def sweep(self, phase):
        """One sweep over the current bad tetrahedra; returns applied count."""
        mesh = self.mesh
        pending = get_bad_tetrahedra(mesh, self.q_min)
        total = 0
        while pending:
            k = self.k
            stats = SweepStats(phase, k)
            if k == 1 or self.pool is None:
                stats.workers = 1
                a, ap, _, log = self._work(phase, pending, None)
                stats.attempted, stats.applied = a, ap
                self.log.extend(log)
                pending = []
            else:
                plan = make_partitions(mesh, pending, k)
                per = _RESERVE_SER if phase == "SER" else _RESERVE_GSC
                mesh.reserve(per * len(pending))
                mesh.frozen = True
                try:
                    futures = [self.pool.submit(self._work, phase, p.bad_tets,
                                                _Ownership(mesh, plan, p.worker_id))
                               for p in plan.partitions]
                    results = [f.result() for f in futures]
                finally:
                    mesh.frozen = False
                # unowned bad tetrahedra count as attempted and suspended
                retry = [t for t in plan.suspended
                         if not mesh.deleted[t] and mesh.quality[t] < self.q_min]
                stats.attempted += len(retry)
                for a, ap, sus, log in results:
                    stats.attempted += a
                    stats.applied += ap
                    retry.extend(sus)
                    self.log.extend(log)
                stats.suspended = len(retry)
                pending = sorted(retry)
            self.sweeps.append(stats)
            self.k = next_worker_count(k, stats.rho, self.max_workers)
            total += stats.applied
            if self.check:
                problems = mesh.audit()
                if problems:
                    raise RuntimeError(f"mesh invariant broken after {phase} sweep: {problems[:3]}")
        if mesh.n_slots > 2 * mesh.n_live + 1024:
            mesh.compact()
        return total


def improve(mesh, q_min=DEFAULT_THRESHOLD, max_workers=1, reproducible=False,
            max_points=MAX_POINTS, node_budget=DEFAULT_NODE_BUDGET, check=False):
    """Improve every tetrahedron below ``q_min`` as far as the operations allow.

    Repeats SER sweeps (smoothing, then edge removal, per bad tetrahedron)
    until one changes nothing, then runs one GSC sweep; stops once a GSC
    sweep changes nothing. The mesh is modified in place.

    Parameters
    ----------
    mesh : TetMesh
    q_min : float
        Tetrahedra with gamma below this are bad.
    max_workers : int
        Upper bound on concurrent workers; 1 runs serially and
        deterministically.
    reproducible : bool
        Canonically reorder the tetrahedra at the end.
    check : bool
        Audit adjacency, surface and exact orientation after every sweep (slow).

    Returns
    -------
    (TetMesh, ImproveResult)
    """
    bad_before = len(get_bad_tetrahedra(mesh, q_min))
    sched = _Scheduler(mesh, q_min, max_workers, max_points, node_budget, check)
    modifications = 0
    try:
        while True:
            while True:
                n = sched.sweep("SER")
                modifications += n
                if n == 0:
                    break
            n = sched.sweep("GSC")
            modifications += n
            if n == 0:
                break
    finally:
        sched.close()
    if reproducible:
        reproducible_reorder(mesh)
    result = ImproveResult(bad_before, len(get_bad_tetrahedra(mesh, q_min)),
                           sched.sweeps, sched.log, modifications)
    return mesh, result


# -- canonical order ----------------------------------------------------------

def _canonical_rows(tets):
    """Vertices ascending, with the last two swapped when that order is negative."""
    tets = np.asarray(tets, dtype=np.int64)
    order = np.argsort(tets, axis=1, kind="stable")
    srt = np.take_along_axis(tets, order, axis=1)
    # parity of the sorting permutation
    inv = np.zeros(len(tets), dtype=np.int64)
    for i in range(4):
        for j in range(i + 1, 4):
            inv += order[:, i] > order[:, j]
    odd = inv % 2 == 1
    srt[odd, 2], srt[odd, 3] = srt[odd, 3].copy(), srt[odd, 2].copy()
    return srt


def reproducible_reorder(mesh):
    """Sort tetrahedra by their sorted vertex tuples and relink adjacency.

    Each row is also rotated to a canonical even permutation, so equal
    tetrahedron sets give identical tables. Modifies ``mesh`` in place and
    returns it.
    """
    rows = _canonical_rows(mesh.tet_array())
    key = np.sort(rows, axis=1)
    perm = np.lexsort(key.T[::-1])
    rows = rows[perm]
    surface = np.array(sorted(mesh.surface), dtype=np.int64).reshape(-1, 3)
    fresh = TetMesh(mesh.points, rows, surface=surface, validate=False)
    fresh.moore = mesh.moore.copy()
    lock = mesh._lock
    mesh.__dict__.update(fresh.__dict__)
    mesh._lock = lock
    return mesh
