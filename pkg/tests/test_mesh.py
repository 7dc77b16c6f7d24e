import numpy as np
import pytest

from helpers import bipyramid, cube_cell, mesh_of
from oracles import exact_volume6, gamma_ref
from tetimprove.exceptions import (
    DisconnectedSeed,
    InvalidMesh,
    NonManifoldFacet,
    OrientationViolation,
    ShellMismatch,
    VolumeMismatch,
)
from tetimprove.io import generate_test_mesh
from tetimprove.mesh import TetMesh, extract_cavity, get_bad_tetrahedra, replace_cavity


def test_single_tet_has_only_boundary(corner):
    m = TetMesh(corner, [[0, 1, 2, 3]])
    assert m.neigh[0].tolist() == [-1, -1, -1, -1]
    assert len(m.surface) == 4
    assert m.audit() == []


def test_two_tets_link_across_shared_facet():
    m = bipyramid(0.3)
    rows = [set(m.tets[t].tolist()) for t in range(2)]
    for t, o in ((0, 1), (1, 0)):
        slot = m.neigh[t].tolist().index(o)
        opposite = int(m.tets[t, slot])
        assert opposite not in rows[o]
        assert rows[t] - {opposite} == {0, 1, 2}


def test_cube_cell_facet_counts():
    m = cube_cell()
    live = m.live_tets()
    assert int((m.neigh[live] >= 0).sum()) // 2 == 6
    assert int((m.neigh[live] < 0).sum()) == 12
    assert m.audit() == []


def test_rejects_inverted_and_out_of_range(corner):
    with pytest.raises(InvalidMesh):
        TetMesh(corner, [[1, 0, 2, 3]])
    with pytest.raises(InvalidMesh):
        TetMesh(corner, [[0, 1, 2, 4]])
    with pytest.raises(InvalidMesh):
        TetMesh(np.full((4, 3), np.nan), [[0, 1, 2, 3]])


def test_three_tets_on_one_facet_is_non_manifold():
    pts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0.2, 0.2, 1], [0.2, 0.2, -1], [0.3, 0.3, 2]]
    with pytest.raises(NonManifoldFacet):
        mesh_of(pts, [(0, 1, 2, 3), (0, 1, 2, 4), (0, 1, 2, 5)])


def test_extract_single_and_pair():
    m = bipyramid(0.3)
    cav = extract_cavity(m, [0])
    assert len(cav.boundary_facets) == 4 and cav.interior_points == []
    cav = extract_cavity(m, [0, 1])
    assert len(cav.boundary_facets) == 6 and cav.interior_points == []
    assert cav.volume == pytest.approx(m.total_volume(), rel=1e-12)


def test_star_of_interior_vertex_has_it_as_only_interior_point():
    m = generate_test_mesh(2)
    v = int(np.flatnonzero(np.all(np.isclose(m.points, 0.5), axis=1))[0])
    star = m.star(v)
    # independent membership scan over the whole table
    assert star == [t for t in m.live_tets().tolist() if v in m.tets[t]]
    cav = extract_cavity(m, star)
    assert cav.interior_points == [v]
    on_shell = {u for f in cav.boundary_facets for u in f}
    assert on_shell == set(cav.all_points) - {v}


def test_extract_errors():
    m = generate_test_mesh(3)
    star0 = m.star(0)
    near = set(m.tets[star0].ravel().tolist())
    far = [t for t in m.live_tets().tolist() if not set(m.tets[t].tolist()) & near]
    with pytest.raises(DisconnectedSeed):
        extract_cavity(m, [star0[0], far[0]])
    with pytest.raises(DisconnectedSeed):
        extract_cavity(m, [])
    with pytest.raises(DisconnectedSeed):
        extract_cavity(m, [m.n_slots + 3])


def test_identity_replacement():
    m = bipyramid(0.3)
    before = {tuple(sorted(r)) for r in m.tet_array().tolist()}
    cav = extract_cavity(m, [0, 1])
    replace_cavity(m, cav, [tuple(m.tets[t]) for t in cav.tets])
    assert {tuple(sorted(r)) for r in m.tet_array().tolist()} == before
    assert m.audit() == []


def test_two_three_replacement_relinks_and_conserves_volume():
    m = bipyramid(0.1)
    p = m.points
    vol6 = sum(exact_volume6(*(p[i] for i in m.tets[t])) for t in m.live_tets())
    new = [(0, 1, 4, 3), (1, 2, 4, 3), (2, 0, 4, 3)]
    new = [t if exact_volume6(*(p[i] for i in t)) > 0 else (t[1], t[0], t[2], t[3]) for t in new]
    cav = extract_cavity(m, [0, 1])
    idx = replace_cavity(m, cav, new)
    assert m.n_live == 3 and m.audit() == []
    assert sum(exact_volume6(*(p[i] for i in m.tets[t])) for t in idx) == vol6
    # 6 shell facets stay on the boundary, 3 new interior facets are paired
    assert int((m.neigh[idx] >= 0).sum()) == 6
    assert int((m.neigh[idx] < 0).sum()) == 6
    assert np.allclose(m.quality[idx], [gamma_ref(p[list(m.tets[t])]) for t in idx])


def test_replacement_errors():
    m = bipyramid(0.1)
    cav = extract_cavity(m, [0, 1])
    good = [tuple(m.tets[t]) for t in cav.tets]
    with pytest.raises(VolumeMismatch):
        replace_cavity(m, cav, good[:1])
    with pytest.raises(OrientationViolation):
        replace_cavity(m, cav, [(good[0][1], good[0][0]) + good[0][2:], good[1]])
    with pytest.raises(ShellMismatch):
        replace_cavity(m, cav, [(0, 1, 2, 7)])
    assert m.n_live == 2 and m.audit() == []


def test_bad_tetrahedra_scan():
    assert get_bad_tetrahedra(generate_test_mesh(2), 0.35) == []
    pts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0.5, 0.5, -1e-3]]
    m = mesh_of(pts, [(0, 1, 2, 3), (0, 2, 1, 4)])
    sliver = [t for t in range(2) if 4 in m.tets[t]]
    assert get_bad_tetrahedra(m, 0.35) == sliver
    m = generate_test_mesh(5, 0.45, seed=4)
    ref = [t for t in m.live_tets().tolist() if gamma_ref(m.points[m.tets[t]]) < 0.35]
    assert get_bad_tetrahedra(m, 0.35) == ref


def test_compact_preserves_tets_and_links():
    m = generate_test_mesh(3, 0.3, seed=1)
    star = m.star(int(np.flatnonzero(~m.on_boundary)[0]))
    cav = extract_cavity(m, star)
    replace_cavity(m, cav, [tuple(m.tets[t]) for t in cav.tets])
    before = sorted(tuple(r) for r in m.tet_array().tolist())
    assert m.n_slots > m.n_live
    m.compact()
    assert m.n_slots == m.n_live
    assert sorted(tuple(r) for r in m.tet_array().tolist()) == before
    assert m.audit() == []


def test_frozen_storage_refuses_growth():
    m = bipyramid(0.1)
    m.reserve(0)
    cav = extract_cavity(m, [0, 1])
    spare = m.free_capacity()
    m.frozen = True
    rows = [tuple(m.tets[t]) for t in cav.tets]
    for _ in range(spare // 2):
        cav = extract_cavity(m, m.live_tets().tolist())
        replace_cavity(m, cav, rows)
    cav = extract_cavity(m, m.live_tets().tolist())
    with pytest.raises(RuntimeError):
        replace_cavity(m, cav, rows)
    m.frozen = False
    replace_cavity(m, cav, rows)
    assert m.audit() == []


def test_copy_is_independent():
    m = generate_test_mesh(2, 0.3, seed=0)
    c = m.copy()
    c.points[0] += 1.0
    c.deleted[0] = True
    assert not m.deleted[0] and not np.allclose(m.points[0], c.points[0])
