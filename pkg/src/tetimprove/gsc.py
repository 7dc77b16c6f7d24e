"""Growing SPR cavity: grow a cavity around a bad tetrahedron one point at a
time and retile it with SPR until a better tiling turns up."""

from dataclasses import dataclass, field

from .exceptions import NoCandidate
from .mesh import extract_cavity, replace_cavity
from .spr import DEFAULT_NODE_BUDGET, MAX_POINTS, SPRState, spr_search

__all__ = ["GrowthFront", "Suspended", "growth_front", "extend_cavity", "gsc"]


class Suspended(Exception):
    """Raised when an operation needs a tetrahedron its worker does not own."""


@dataclass
class GrowthFront:
    """Tetrahedra facet-adjacent to the cavity and per-point tallies.

    ``tally[v] = (m, quality_sum)`` over the adjacent tetrahedra incident
    to candidate point ``v``.
    """

    adjacent_tets: list
    tally: dict = field(default_factory=dict)

    def ranked(self):
        """Candidates, most connected first; ties go to the lowest quality
        sum, then the smallest vertex index."""
        return sorted(self.tally, key=lambda v: (-self.tally[v][0], self.tally[v][1], v))


def growth_front(mesh, cavity_tets, points):
    cset = set(cavity_tets)
    adjacent = set()
    for t in cavity_tets:
        for n in mesh.neigh[t].tolist():
            if n >= 0 and n not in cset:
                adjacent.add(n)
    adjacent = sorted(adjacent)
    tally = {}
    for a in adjacent:
        q = float(mesh.quality[a])
        for v in mesh.tets[a].tolist():
            if v not in points:
                m, s = tally.get(v, (0, 0.0))
                tally[v] = (m + 1, s + q)
    return GrowthFront(adjacent, tally)


def _closure(mesh, p, points):
    """Live tetrahedra incident to ``p`` whose other vertices are all in ``points``."""
    out = []
    for t in mesh.star(p):
        if all(v == p or v in points for v in mesh.tets[t].tolist()):
            out.append(t)
    return out


def _buries_constraint(mesh, new_tets, cavity):
    for t in new_tets:
        for i in range(4):
            if mesh.constrained[t, i] and int(mesh.neigh[t, i]) in cavity:
                return True
    return False


def extend_cavity(mesh, cavity_tets, points, front=None, owns=None):
    """Add the most connected candidate point and every tetrahedron it closes.

    Parameters
    ----------
    cavity_tets : list of int
    points : list of int
        Cavity points in insertion order.
    owns : callable, optional
        ``owns(tet) -> bool``; a growth step that would add a tetrahedron
        the caller does not own raises :class:`Suspended`.

    Returns
    -------
    (list, list)
        The grown tetrahedron and point lists.
    """
    pset = set(points)
    if front is None:
        front = growth_front(mesh, cavity_tets, pset)
    cset = set(cavity_tets)
    for p in front.ranked():
        pset.add(p)
        added = _closure(mesh, p, pset)
        pset.discard(p)
        grown = cset.union(added)
        if _buries_constraint(mesh, added, grown):
            continue
        if owns is not None and not all(owns(t) for t in added):
            raise Suspended("cavity growth leaves the partition")
        return sorted(grown), list(points) + [p]
    raise NoCandidate("no point can extend the cavity")


def gsc(mesh, seed, max_points=MAX_POINTS, node_budget=DEFAULT_NODE_BUDGET,
        owns=None, neighbor_ok=None, log=None, trace=None):
    """Try to improve the region around ``seed``; True when the mesh changed.

    ``neighbor_ok(tet)`` vets the tetrahedra just outside the final cavity
    (they get relinked); a refusal raises :class:`Suspended`.
    """
    cavity_tets = [int(seed)]
    points = mesh.tets[seed].tolist()
    state = SPRState(max_points=max_points)
    state.global_ids = []
    n = 4
    while n < max_points:
        try:
            cavity_tets, points = extend_cavity(mesh, cavity_tets, points, owns=owns)
        except NoCandidate:
            return False
        n += 1
        cav = extract_cavity(mesh, cavity_tets, require_connected=False)
        floor = cav.quality
        res = spr_search(mesh, cav, floor, node_budget, state=state)
        if trace is not None:
            trace.append((n, len(cavity_tets), floor, res))
        if res.tets is None:
            continue
        if neighbor_ok is not None:
            for n_out, _, _ in cav.links:
                if n_out >= 0 and not neighbor_ok(n_out):
                    raise Suspended("cavity shell touches a foreign tetrahedron")
        replace_cavity(mesh, cav, res.tets)
        if log is not None:
            log.append(("gsc", floor, res.quality))
        return True
    return False
