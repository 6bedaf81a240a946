import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from andersonlab.lattice import (
    Annulus,
    Cube,
    GeometryError,
    boundary,
    cube_points,
    cube_points_array,
    dist_inf,
    footprint_separation,
    footprint_sites,
    is_diagonal,
    point_index,
    projection,
    sym_dist,
    sym_separated,
)


def test_cube_points_1d():
    c = Cube((0,), 1, 1, 1)
    assert cube_points(c) == [(-1,), (0,), (1,)]
    assert c.n_points == 3


def test_cube_points_two_particles():
    c = Cube((0, 0), 1, 2, 1)
    pts = cube_points(c)
    assert len(pts) == 9
    assert c.n_points == 9


def test_cube_cardinality_n2_d2():
    # (2L+1)^(N*d) = 7^4
    c = Cube((0, 0, 0, 0), 3, 2, 2)
    assert c.n_points == 7**4 == 2401
    assert len(cube_points(c)) == 2401


def test_enumeration_order_golden():
    # Frozen golden enumeration: lexicographic, first coordinate slowest.
    c = Cube((1, -1), 1, 2, 1)
    assert cube_points(c) == [
        (0, -2), (0, -1), (0, 0),
        (1, -2), (1, -1), (1, 0),
        (2, -2), (2, -1), (2, 0),
    ]


def test_point_index_matches_enumeration():
    c = Cube((2, -1, 0, 3), 2, 2, 2)
    pts = cube_points(c)
    for i in (0, 17, 100, len(pts) - 1):
        assert point_index(c, pts[i]) == i
    arr = cube_points_array(c)
    assert [tuple(r) for r in arr] == pts


@given(
    n=st.integers(1, 3),
    d=st.integers(1, 2),
    L=st.integers(0, 2),
)
@settings(max_examples=30, deadline=None)
def test_cardinality_property(n, d, L):
    center = tuple(range(n * d))
    c = Cube(center, L, n, d)
    assert len(cube_points(c)) == (2 * L + 1) ** (n * d)


def test_boundary_inner_outer_edge_1d():
    c = Cube((0,), 2, 1, 1)
    assert boundary(c, "inner") == {(-2,), (2,)}
    assert boundary(c, "outer") == {(-3,), (3,)}
    assert boundary(c, "edge") == {((-2,), (-3,)), ((2,), (3,))}


def test_inner_boundary_count_n2():
    c = Cube((0, 0), 1, 2, 1)
    assert len(boundary(c, "inner")) == 9 - 1 == 8


def test_boundary_partition_and_edge_distance():
    c = Cube((1, 2), 2, 1, 2)
    pts = set(cube_points(c))
    inner = boundary(c, "inner")
    outer = boundary(c, "outer")
    interior = {x for x in pts if dist_inf(x, c.center) < c.radius}
    assert inner | interior == pts and not (inner & interior)
    assert not (outer & pts)
    for x, y in boundary(c, "edge"):
        assert x in inner and y in outer
        assert dist_inf(x, y) == 1
        # coupled by a single unit hop
        assert sum(abs(a - b) for a, b in zip(x, y)) == 1


def _sym_dist_brute(x, y, n):
    d = len(x) // n
    xr = [x[i * d : (i + 1) * d] for i in range(n)]
    yr = [y[i * d : (i + 1) * d] for i in range(n)]
    return min(
        max(dist_inf(a, b) for a, b in zip(xr, perm))
        for perm in itertools.permutations(yr)
    )


def test_sym_dist_examples():
    assert sym_dist((3, 7), (7, 3), 2) == 0
    assert sym_dist((0, 0), (5, 5), 2) == 5


def test_sym_dist_matches_bruteforce_n3_d2():
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = tuple(rng.integers(-9, 10, size=6))
        y = tuple(rng.integers(-9, 10, size=6))
        assert sym_dist(x, y, 3) == _sym_dist_brute(x, y, 3)


def test_sym_dist_rejects_large_n():
    x = tuple(range(9))
    with pytest.raises(GeometryError):
        sym_dist(x, x, 9)


@given(st.data())
@settings(max_examples=60, deadline=None)
def test_sym_dist_pseudometric(data):
    n, d = 2, 2
    coords = st.tuples(*[st.integers(-6, 6)] * (n * d))
    x = data.draw(coords)
    y = data.draw(coords)
    z = data.draw(coords)
    dxy = sym_dist(x, y, n)
    assert dxy == sym_dist(y, x, n)
    assert sym_dist(x, x, n) == 0
    assert dxy <= dist_inf(x, y)
    assert dxy <= sym_dist(x, z, n) + sym_dist(z, y, n)


def test_sym_separated_multiplier():
    x, y = (0, 0), (9, 9)
    assert sym_separated(x, y, 2, 2, 4)       # 9 > 8
    assert not sym_separated(x, y, 2, 2, 4.5)  # 9 == 9 is not >


def test_is_diagonal():
    assert is_diagonal((4, 4, 4), 3)
    assert is_diagonal((1, 2, 1, 2), 2)  # two particles at (1,2) in d=2
    assert not is_diagonal((1, 2), 2)


def test_projection_examples():
    c = Cube((1, 9), 2, 2, 1)
    assert projection(c, [0]) == Cube((1,), 2, 1, 1)
    assert projection(c, [0, 1]) == c
    c3 = Cube((0, 10, 20), 3, 3, 1)
    assert projection(c3, [1, 2]) == Cube((10, 20), 3, 2, 1)
    with pytest.raises(GeometryError):
        projection(c, [])


def test_footprint_separation():
    # centers 0 and 100, L=3: footprints [-3,3] and [97,103] -> gap 94
    c = Cube((0, 100), 3, 2, 1)
    assert footprint_separation(c, [0], [1]) == 94
    diag = Cube((5, 5), 3, 2, 1)
    assert footprint_separation(diag, [0], [1]) == 0


def test_footprint_sites():
    c = Cube((0, 4), 1, 2, 1)
    assert footprint_sites(c) == [(-1,), (0,), (1,), (3,), (4,), (5,)]
    overlapping = Cube((0, 1), 1, 2, 1)
    assert footprint_sites(overlapping) == [(-1,), (0,), (1,), (2,)]


def test_annulus():
    a = Annulus((0,), 1, 3, 1, 1)
    assert a.width == 2
    assert set(a.points()) == {(-3,), (-2,), (2,), (3,)}
    assert a.contains((2,)) and not a.contains((1,)) and not a.contains((4,))
    ball = Annulus((0,), -1, 1, 1, 1)
    assert set(ball.points()) == {(-1,), (0,), (1,)}
    with pytest.raises(GeometryError):
        Annulus((0,), 3, 3, 1, 1)
