import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from oracles import gamma_ref
from tetimprove.exceptions import DegenerateTet, EmptySet
from tetimprove.quality import (
    batch_dihedral_angles,
    batch_gamma,
    batch_sicn,
    cavity_quality,
    dihedral_angles,
    gamma,
    sicn,
)

coord = st.floats(-10, 10, allow_nan=False)
tet_strategy = st.lists(st.tuples(coord, coord, coord), min_size=4, max_size=4)


def _positive(p):
    p = np.asarray(p, dtype=float)
    if np.linalg.det(p[1:] - p[0]) < 0:
        p[[0, 1]] = p[[1, 0]]
    return p


def _random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q *= np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def sicn_ref(p):
    """3 / Frobenius condition number of the map from a regular tet built
    from alternate cube corners."""
    ref = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    if np.linalg.det(ref[1:] - ref[0]) < 0:
        ref[[2, 3]] = ref[[3, 2]]
    e = (p[1:] - p[0]).T
    r = (ref[1:] - ref[0]).T
    s = e @ np.linalg.inv(r)
    kappa = np.linalg.norm(s) * np.linalg.norm(np.linalg.inv(s))
    return math.copysign(3.0 / kappa, np.linalg.det(s))


def test_regular_scores_one(regular):
    assert abs(gamma(regular) - 1.0) <= 1e-12
    assert abs(sicn(regular) - 1.0) <= 1e-12
    assert np.allclose(dihedral_angles(regular), math.degrees(math.acos(1.0 / 3.0)), atol=1e-6)


def test_corner_tet_closed_form(corner):
    # inradius 1/(3+sqrt3), longest edge sqrt2
    expected = math.sqrt(24.0) * (1.0 / (3.0 + math.sqrt(3.0))) / math.sqrt(2.0)
    assert abs(gamma(corner) - expected) <= 1e-12
    assert abs(gamma(corner) - 0.7320508) < 1e-7


def test_corner_tet_right_angles(corner):
    ang = dihedral_angles(corner)
    # edges (0,1), (0,2), (0,3) are the axes
    assert np.allclose(ang[:3], 90.0)
    assert np.allclose(ang[3:], math.degrees(math.acos(1.0 / math.sqrt(3.0))))


def test_inverted_is_negative(corner):
    flipped = corner[[1, 0, 2, 3]]
    assert gamma(flipped) == pytest.approx(-gamma(corner))
    assert sicn(flipped) == pytest.approx(-sicn(corner))


def test_flat_scores_zero():
    flat = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
    assert gamma(flat) == 0.0
    assert sicn(flat) == 0.0
    with pytest.raises(DegenerateTet):
        dihedral_angles(flat)


def test_empty_cavity_quality():
    with pytest.raises(EmptySet):
        cavity_quality([])
    assert cavity_quality([0.3, 0.1, 0.5]) == 0.1


@settings(max_examples=300, deadline=None)
@given(tet_strategy)
def test_gamma_matches_independent_formula(pts):
    p = _positive(pts)
    vol6 = np.linalg.det(p[1:] - p[0])
    emax = max(np.linalg.norm(p[i] - p[j]) for i, j in itertools.combinations(range(4), 2))
    assume(vol6 > 1e-6 * emax ** 3)
    assert gamma(p) == pytest.approx(gamma_ref(p), rel=1e-9, abs=1e-12)
    assert 0.0 < gamma(p) <= 1.0 + 1e-12


@settings(max_examples=300, deadline=None)
@given(tet_strategy)
def test_sicn_matches_condition_number(pts):
    p = _positive(pts)
    emax = max(np.linalg.norm(p[i] - p[j]) for i, j in itertools.combinations(range(4), 2))
    assume(np.linalg.det(p[1:] - p[0]) > 1e-6 * emax ** 3)
    assert sicn(p) == pytest.approx(sicn_ref(p), rel=1e-8, abs=1e-12)
    assert 0.0 < sicn(p) <= 1.0


def test_invariant_under_similarity():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = _positive(rng.uniform(-1, 1, (4, 3)))
        q = _random_rotation(rng)
        moved = p @ q.T * rng.uniform(0.01, 100) + rng.uniform(-5, 5, 3)
        assert gamma(moved) == pytest.approx(gamma(p), rel=1e-9)
        assert sicn(moved) == pytest.approx(sicn(p), rel=1e-9)
        assert np.allclose(np.sort(dihedral_angles(moved)), np.sort(dihedral_angles(p)))


def test_even_permutations_keep_value():
    rng = np.random.default_rng(5)
    p = _positive(rng.uniform(-1, 1, (4, 3)))
    for perm in itertools.permutations(range(4)):
        inv = sum(perm[i] > perm[j] for i in range(4) for j in range(i + 1, 4))
        sign = -1 if inv % 2 else 1
        assert gamma(p[list(perm)]) == pytest.approx(sign * gamma(p), rel=1e-12)


def test_dihedral_sum_bounds():
    # the six angles of a tetrahedron add up to between 2 pi and 3 pi
    rng = np.random.default_rng(2)
    for _ in range(200):
        p = _positive(rng.uniform(-1, 1, (4, 3)))
        total = dihedral_angles(p).sum()
        assert 360.0 - 1e-9 < total < 540.0 + 1e-9


def test_batch_versions_agree():
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1, 1, (60, 3))
    tets = np.array([rng.choice(60, 4, replace=False) for _ in range(200)])
    g = batch_gamma(pts, tets)
    s = batch_sicn(pts, tets)
    d = batch_dihedral_angles(pts, tets)
    for i, t in enumerate(tets):
        assert g[i] == pytest.approx(gamma(pts[t]), rel=1e-12, abs=1e-300)
        assert s[i] == pytest.approx(sicn(pts[t]), rel=1e-9, abs=1e-12)
        if g[i] > 1e-9:
            assert np.allclose(d[i], dihedral_angles(pts[t]))


def test_gamma_rounds_identically_under_relabelling():
    rng = np.random.default_rng(21)
    for _ in range(100):
        p = rng.normal(size=(4, 3))
        mags = {abs(gamma(p[list(perm)])) for perm in itertools.permutations(range(4))}
        assert len(mags) == 1


def test_mirrored_regular_sicn(regular):
    mirrored = regular * np.array([1.0, 1.0, -1.0])
    assert abs(sicn(mirrored) + 1.0) <= 1e-12


def test_corner_sicn_from_singular_values(corner):
    s3 = math.sqrt(3.0)
    ref = np.array([[0, 0, 0], [1, 0, 0], [0.5, s3 / 2, 0], [0.5, s3 / 6, math.sqrt(2.0 / 3.0)]])
    s = (corner[1:] - corner[0]).T @ np.linalg.inv((ref[1:] - ref[0]).T)
    sig = np.linalg.svd(s, compute_uv=False)
    expected = 3.0 / (math.sqrt((sig ** 2).sum()) * math.sqrt((sig ** -2.0).sum()))
    assert sicn(corner) == pytest.approx(expected, abs=1e-10)


def test_sliver_limit_opens_an_angle_to_180():
    prev = 0.0
    for h in (1e-1, 1e-2, 1e-3, 1e-4):
        p = np.array([[0, 0, 0], [1, 1, 0], [1, 0, h], [0, 1, h]], dtype=float)
        worst = dihedral_angles(_positive(p)).max()
        assert worst > prev
        prev = worst
    assert prev > 179.9


def test_cavity_quality_is_full_scan_minimum():
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, (4 * 50, 3))
    qs = [gamma(_positive(pts[4 * i: 4 * i + 4])) for i in range(50)]
    assert cavity_quality(qs) == min(qs)
    assert cavity_quality([qs[0]]) == qs[0]
    assert cavity_quality([0.9, 0.2]) == 0.2
