"""Small polyhedron reconnection: best tetrahedralisation of a small cavity.

Depth-first branch and bound. A shell facet is filled with a tetrahedron,
the shell is updated and the search recurses until the shell is empty.
Any complete set of positively oriented tetrahedra whose boundary chain
equals the cavity shell tiles the cavity exactly once, so the geometric
crossing tests below only prune; they never decide validity on their own.
"""

from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .exceptions import TooManyPoints
from .mesh import canonical_face
from .quality import FACES, gamma_points

__all__ = ["SPRState", "SPRResult", "spr_search", "candidate_tet_valid",
           "MAX_POINTS", "DEFAULT_NODE_BUDGET"]

MAX_POINTS = 32
DEFAULT_NODE_BUDGET = 100_000


def _sort4(i, j, k, l):
    """Sorted tuple of four distinct indices and the permutation parity."""
    parity = 1
    a = [i, j, k, l]
    for x in range(3):
        for y in range(3 - x):
            if a[y] > a[y + 1]:
                a[y], a[y + 1] = a[y + 1], a[y]
                parity = -parity
    return a, parity


@dataclass
class SPRResult:
    """Outcome of one search.

    ``tets`` holds local 4-tuples (or global ones from :func:`spr_search`)
    of the best tiling found, ``None`` when nothing beat the floor.
    ``exhausted`` is set when the node budget ran out before the search
    space was closed. An exhausted search reports no tiling even if it had
    an incumbent, so ``tets is None`` then means "unknown", not "none".
    """

    tets: list
    quality: float
    nodes: int
    exhausted: bool

    @property
    def found(self):
        return self.tets is not None


class _BudgetExhausted(Exception):
    pass


class SPRState:
    """Points of a cavity plus the quality memo, reusable as the cavity grows.

    The memo is keyed by sorted local 4-tuples and stores the gamma of the
    sorted tuple (its sign gives the orientation). A second table records
    how many cavity points have been verified to lie outside each tetrahedron,
    so adding points only re-checks the new ones.
    """

    def __init__(self, coords=(), max_points=MAX_POINTS):
        self.max_points = max_points
        self.coords = []
        self.xyz = np.zeros((max_points, 3))
        self.memo = {}
        self._orient = {}
        self._empty = {}
        self._apex = {}
        for c in coords:
            self.add_point(c)

    @property
    def n(self):
        return len(self.coords)

    def add_point(self, xyz):
        if len(self.coords) >= self.max_points:
            raise TooManyPoints(f"an SPR cavity holds at most {self.max_points} points")
        self.coords.append(tuple(float(v) for v in xyz))
        self.xyz[len(self.coords) - 1] = self.coords[-1]
        return len(self.coords) - 1

    def _key(self, s):
        return ((s[0] * 32 + s[1]) * 32 + s[2]) * 32 + s[3]

    def sorted_quality(self, s):
        key = self._key(s)
        q = self.memo.get(key)
        if q is None:
            c = self.coords
            q = gamma_points(c[s[0]], c[s[1]], c[s[2]], c[s[3]])
            self.memo[key] = q
        return q

    def quality(self, i, j, k, l):
        """Signed gamma of the oriented tetrahedron ``(i, j, k, l)``."""
        s, parity = _sort4(i, j, k, l)
        return parity * self.sorted_quality(s)

    def orient(self, i, j, k, l):
        # keyed by the ordered tuple to skip the sort on the hot path
        key = (((i << 5 | j) << 5 | k) << 5) | l
        o = self._orient.get(key)
        if o is None:
            q = self.quality(i, j, k, l)
            o = (q > 0.0) - (q < 0.0)
            self._orient[key] = o
        return o

    def is_empty(self, i, j, k, l):
        """No other cavity point lies in the closed tetrahedron ``ijkl``."""
        s, _ = _sort4(i, j, k, l)
        key = self._key(s)
        done = self._empty.get(key, 0)
        if done < 0:
            return False
        n = len(self.coords)
        if done >= n:
            return True
        a, b, c, d = s
        if self.sorted_quality(s) < 0.0:
            b, c = c, b
        p = done
        while True:
            status, p = _kernels.empty_scan(self.xyz, a, b, c, d, p, n)
            if status == 1:
                break
            # undecided by the float filter: settle it exactly
            if status < 0 or (self.orient(p, b, c, d) >= 0 and self.orient(a, p, c, d) >= 0
                              and self.orient(a, b, p, d) >= 0 and self.orient(a, b, c, p) >= 0):
                self._empty[key] = -1
                return False
            p += 1
        self._empty[key] = n
        return True

    def apex_qualities(self, facet):
        """Signed gamma of ``(a, c, b, p)`` for every point ``p``; memoised
        per facet and extended as points are added."""
        a, b, c = facet
        n = len(self.coords)
        row = self._apex.get(facet)
        done = 0 if row is None else len(row)
        if done >= n:
            return row
        out = np.empty(n)
        if done:
            out[:done] = row
        _kernels.apex_gamma(self.xyz, a, b, c, done, n, out)
        for p in range(done, n):
            if out[p] == 0.0 and p != a and p != b and p != c:
                out[p] = self.quality(a, c, b, p)
        self._apex[facet] = out
        return out

    # -- search ----------------------------------------------------------------

    def _crosses(self, s, t, u, v, w):
        """Segment ``st`` strictly crosses the interior of triangle ``uvw``."""
        o1 = self.orient(u, v, w, s)
        if o1 == 0:
            return False
        o2 = self.orient(u, v, w, t)
        if o2 == 0 or o1 == o2:
            return False
        a = self.orient(s, t, u, v)
        if a == 0:
            return False
        return self.orient(s, t, v, w) == a and self.orient(s, t, w, u) == a

    def crosses_shell(self, facet, p, shell):
        a, b, c = facet
        new_faces = ((a, b, p), (b, c, p), (c, a, p))
        for g in shell:
            for x in (a, b, c):
                if x not in g and p not in g and self._crosses(x, p, *g):
                    return True
            for e0, e1 in ((g[0], g[1]), (g[1], g[2]), (g[2], g[0])):
                if e0 > e1:
                    continue  # each undirected shell edge appears in two facets
                for f in new_faces:
                    if e0 not in f and e1 not in f and self._crosses(e0, e1, *f):
                        return True
        return False

    def candidates(self, facet, floor):
        """Apexes that close a valid tetrahedron on ``facet``, best first."""
        a, b, c = facet
        row = self.apex_qualities(facet)
        out = []
        for p in np.nonzero(row > max(floor, 0.0))[0].tolist():
            if self.is_empty(a, c, b, p):
                out.append((-float(row[p]), p))
        out.sort()
        return out

    def search(self, shell, floor, node_budget=DEFAULT_NODE_BUDGET, prune_crossings=False):
        """Best tiling of the region bounded by ``shell`` (outward local facets).

        ``prune_crossings`` rejects placements that cut through the shell
        early. It never changes the answer, only the work done, and in
        pure Python it usually costs more than it saves.
        """
        shell = {canonical_face(tuple(f)) for f in shell}
        cache = {}
        best = {"tets": None, "q": floor}
        placed = []
        counter = [0]

        def cands(f):
            lst = cache.get(f)
            if lst is None:
                lst = self.candidates(f, floor)
                cache[f] = lst
            return lst

        def recurse(cur_min):
            counter[0] += 1
            if counter[0] > node_budget:
                raise _BudgetExhausted
            bound = best["q"]
            if cur_min <= bound:
                return
            if not shell:
                best["tets"] = list(placed)
                best["q"] = cur_min
                return
            # fail-first: the facet with the fewest live candidates
            pick, pick_key = None, None
            for f in shell:
                lst = cands(f)
                cnt = bisect_left(lst, (-bound, -1))
                key = (cnt, f)
                if pick_key is None or key < pick_key:
                    pick, pick_key = f, key
                    if cnt == 0:
                        return
            a, b, c = pick
            for negq, p in cands(pick):
                q = -negq
                if q <= best["q"]:
                    break
                tet = (a, c, b, p)
                faces = [canonical_face((tet[x], tet[y], tet[z])) for x, y, z in FACES]
                removed, added = [], []
                ok = True
                for face in faces:
                    if face in shell:
                        removed.append(face)
                    else:
                        rev = canonical_face((face[0], face[2], face[1]))
                        if rev in shell:
                            ok = False
                            break
                        added.append(rev)
                if not ok:
                    continue
                if prune_crossings and self.crosses_shell(pick, p, shell):
                    continue
                for face in removed:
                    shell.discard(face)
                shell.update(added)
                placed.append(tet)
                recurse(min(cur_min, q))
                placed.pop()
                shell.difference_update(added)
                shell.update(removed)

        exhausted = False
        try:
            recurse(float("inf"))
        except _BudgetExhausted:
            exhausted = True
        if exhausted or best["tets"] is None:
            return SPRResult(None, floor, counter[0], exhausted)
        return SPRResult(best["tets"], best["q"], counter[0], False)


def candidate_tet_valid(state, facet, apex, shell=()):
    """Whether ``apex`` closes a usable tetrahedron on the outward ``facet``.

    Checks orientation, that no other cavity point lies in the closed
    tetrahedron, and that no shell edge or facet strictly crosses it.
    """
    a, b, c = facet
    if apex in facet:
        return False
    if state.orient(a, c, b, apex) <= 0:
        return False
    if not state.is_empty(a, c, b, apex):
        return False
    shell = [tuple(f) for f in shell if canonical_face(tuple(f)) != canonical_face(facet)]
    return not state.crosses_shell(facet, apex, shell)


def spr_search(mesh, cavity, floor, node_budget=DEFAULT_NODE_BUDGET, state=None):
    """Best retiling of a mesh cavity whose worst element beats ``floor``.

    Returns an :class:`SPRResult` whose ``tets`` are global vertex tuples.
    ``state`` may carry a memo from a previous call on a subset of the same
    points; its local ordering must be a prefix of ``cavity.all_points``
    order as registered through ``state.global_ids``.
    """
    pts = cavity.all_points
    if len(pts) > MAX_POINTS:
        raise TooManyPoints(f"cavity has {len(pts)} points; at most {MAX_POINTS} allowed")
    if state is None or not hasattr(state, "global_ids"):
        state = SPRState()
        state.global_ids = []
    local = {g: i for i, g in enumerate(state.global_ids)}
    for g in pts:
        if g not in local:
            local[g] = state.add_point(mesh.points[g])
            state.global_ids.append(g)
    shell = [tuple(local[v] for v in f) for f in cavity.boundary_facets]
    res = state.search(shell, floor, node_budget)
    if res.tets is not None:
        ids = state.global_ids
        res.tets = [tuple(ids[v] for v in t) for t in res.tets]
    return res
