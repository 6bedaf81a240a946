"""Geometry of multi-particle configuration space.

A configuration of ``n_particles`` particles in ``Z^d`` is a flat tuple of
``n_particles * dim`` integers, grouped particle-by-particle.  All distances
use the max-norm unless stated otherwise.  Cubes are max-norm balls in the
product lattice ``Z^(n_particles*dim)``; their point enumeration order is the
matrix index convention used throughout the package.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial
from typing import Iterable, Iterator, Sequence

import numpy as np

Point = tuple[int, ...]

#: Exhaustive permutation scan cap for the symmetrized distance.  Min over
#: permutations of a max-cost is not a linear assignment problem, so there is
#: no polynomial shortcut; beyond this many particles we refuse rather than
#: silently approximate.
MAX_PARTICLES_EXACT = 8


class GeometryError(ValueError):
    """Raised when a geometric precondition is violated."""


def norm_inf(x: Sequence[int]) -> int:
    """Max-norm of a configuration (or any integer vector)."""
    return max(abs(int(c)) for c in x)


def dist_inf(x: Sequence[int], y: Sequence[int]) -> int:
    if len(x) != len(y):
        raise GeometryError(f"length mismatch: {len(x)} vs {len(y)}")
    return max(abs(int(a) - int(b)) for a, b in zip(x, y))


@dataclass(frozen=True)
class Cube:
    """Finite cube ``{x : ||x - center||_inf <= radius}`` in Z^(n*d).

    ``center`` is a flat configuration tuple of length ``n_particles * dim``.
    """

    center: Point
    radius: int
    n_particles: int
    dim: int

    def __post_init__(self) -> None:
        if self.n_particles < 1 or self.dim < 1:
            raise GeometryError("n_particles and dim must be positive")
        if len(self.center) != self.n_particles * self.dim:
            raise GeometryError(
                f"center length {len(self.center)} != n_particles*dim "
                f"= {self.n_particles * self.dim}"
            )
        if self.radius < 0:
            raise GeometryError("radius must be non-negative")
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))

    @property
    def n_coords(self) -> int:
        return self.n_particles * self.dim

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def n_points(self) -> int:
        """Cardinality (2L+1)^(n*d)."""
        return self.side**self.n_coords

    def contains(self, x: Sequence[int]) -> bool:
        return dist_inf(x, self.center) <= self.radius

    def particle_center(self, j: int) -> Point:
        """Position in Z^d of particle slot ``j`` (0-based) of the center."""
        return self.center[j * self.dim : (j + 1) * self.dim]

    def __contains__(self, x: Sequence[int]) -> bool:
        return self.contains(x)


def cube_points(cube: Cube) -> list[Point]:
    """All points of the cube in lexicographic order, first coordinate slowest.

    The position of a point in this list is its row/column index in every
    matrix assembled over the cube; the order is stable across runs and
    platforms.
    """
    ranges = [
        range(c - cube.radius, c + cube.radius + 1) for c in cube.center
    ]
    return list(itertools.product(*ranges))


def cube_points_array(cube: Cube) -> np.ndarray:
    """Same enumeration as :func:`cube_points`, as an (n_points, n_coords) array."""
    grids = np.meshgrid(
        *(
            np.arange(c - cube.radius, c + cube.radius + 1)
            for c in cube.center
        ),
        indexing="ij",
    )
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def point_index(cube: Cube, x: Sequence[int]) -> int:
    """Index of ``x`` in the :func:`cube_points` enumeration."""
    if not cube.contains(x):
        raise GeometryError(f"{tuple(x)} not in cube")
    idx = 0
    for c, u in zip(x, cube.center):
        idx = idx * cube.side + (int(c) - (u - cube.radius))
    return idx


def boundary(cube: Cube, kind: str):
    """Boundary sets of a cube.

    kind="inner":  set of points at max-norm distance exactly L from the center.
    kind="outer":  set of points at distance exactly L+1.
    kind="edge":   set of ordered pairs (x, x') with x in the inner boundary,
                   x' in the outer boundary, coupled by a single-particle unit
                   hop (exactly one coordinate differs, by 1).  These are the
                   pairs the nearest-neighbor Laplacian couples across the
                   cube surface, which is what makes the geometric resolvent
                   identity exact.
    """
    if kind == "inner":
        return {
            x for x in cube_points(cube) if dist_inf(x, cube.center) == cube.radius
        }
    if kind == "outer":
        bigger = Cube(cube.center, cube.radius + 1, cube.n_particles, cube.dim)
        return {
            x
            for x in cube_points(bigger)
            if dist_inf(x, cube.center) == cube.radius + 1
        }
    if kind == "edge":
        pairs = set()
        for x in boundary(cube, "inner"):
            for i in range(cube.n_coords):
                for step in (-1, 1):
                    y = x[:i] + (x[i] + step,) + x[i + 1 :]
                    if dist_inf(y, cube.center) == cube.radius + 1:
                        pairs.add((x, y))
        return pairs
    raise ValueError(f"unknown boundary kind: {kind!r}")


def _particle_rows(x: Sequence[int], n_particles: int) -> np.ndarray:
    coords = np.asarray(x, dtype=np.int64)
    if coords.size % n_particles:
        raise GeometryError(
            f"configuration length {coords.size} not divisible by {n_particles}"
        )
    return coords.reshape(n_particles, -1)


def sym_dist(x: Sequence[int], y: Sequence[int], n_particles: int) -> int:
    """Symmetrized distance: min over particle permutations of ||x - tau(y)||_inf.

    Exhaustive over all n! permutations; refuses n_particles > 8.
    """
    if len(x) != len(y):
        raise GeometryError("configurations must have equal length")
    if n_particles > MAX_PARTICLES_EXACT:
        raise GeometryError(
            f"exact permutation scan limited to {MAX_PARTICLES_EXACT} particles "
            f"(got {n_particles}); refusing to approximate"
        )
    xr = _particle_rows(x, n_particles)
    yr = _particle_rows(y, n_particles)
    # pairwise max-norm distances between particle slots, then min over
    # permutations of the max along the matched diagonal
    pair = np.abs(xr[:, None, :] - yr[None, :, :]).max(axis=2)
    best = None
    for perm in itertools.permutations(range(n_particles)):
        cand = max(pair[i, p] for i, p in enumerate(perm))
        if best is None or cand < best:
            best = cand
            if best == 0:
                break
    return int(best)


def sym_separated(
    x: Sequence[int],
    y: Sequence[int],
    n_particles: int,
    radius: int,
    multiplier: float,
) -> bool:
    """Whether sym_dist(x, y) > multiplier * radius.

    The multiplier is explicit because different estimates pair the same
    distance with different factors (2N, 2n, ...).
    """
    return sym_dist(x, y, n_particles) > multiplier * radius


def is_diagonal(x: Sequence[int], n_particles: int) -> bool:
    """Whether all particles sit at the same site of Z^d."""
    rows = _particle_rows(x, n_particles)
    return bool((rows == rows[0]).all())


def projection(cube: Cube, particles: Iterable[int]) -> Cube:
    """Sub-cube over a subset of particle slots (0-based), same radius."""
    subset = sorted(set(int(j) for j in particles))
    if not subset:
        raise GeometryError("particle subset must be nonempty")
    if subset[0] < 0 or subset[-1] >= cube.n_particles:
        raise GeometryError(f"particle indices out of range: {subset}")
    center = tuple(
        itertools.chain.from_iterable(cube.particle_center(j) for j in subset)
    )
    return Cube(center, cube.radius, len(subset), cube.dim)


def footprint_separation(cube: Cube, group_a: Iterable[int], group_b: Iterable[int]) -> int:
    """Max-norm distance in Z^d between the single-particle footprints of two
    particle groups.

    The footprint of a group is the union over its slots j of the radius-L
    boxes around the center positions u_j; the distance between two boxes
    around u_i, u_j is max(0, ||u_i - u_j||_inf - 2L).
    """
    best = None
    for i in group_a:
        for j in group_b:
            d = max(
                0,
                dist_inf(cube.particle_center(i), cube.particle_center(j))
                - 2 * cube.radius,
            )
            if best is None or d < best:
                best = d
    if best is None:
        raise GeometryError("both particle groups must be nonempty")
    return best


def footprint_sites(cube: Cube) -> list[Point]:
    """Union of the single-particle boxes of all particle slots, sorted.

    These are the Z^d sites a random-field sample must cover before the
    finite-volume operator over the cube can be assembled.  The sorted order
    doubles as the canonical sampling order for that region.
    """
    sites: set[Point] = set()
    for j in range(cube.n_particles):
        u = cube.particle_center(j)
        ranges = [range(c - cube.radius, c + cube.radius + 1) for c in u]
        sites.update(itertools.product(*ranges))
    return sorted(sites)


@dataclass(frozen=True)
class Annulus:
    """Radial annulus C_b(center) \\ C_a(center).

    ``inner_radius`` may be -1, in which case the annulus degenerates to the
    full ball C_b (needed when a covered set reaches the center).
    """

    center: Point
    inner_radius: int
    outer_radius: int
    n_particles: int
    dim: int

    def __post_init__(self) -> None:
        if self.inner_radius < -1:
            raise GeometryError("inner radius must be >= -1")
        if self.outer_radius <= self.inner_radius:
            raise GeometryError("outer radius must exceed inner radius")

    @property
    def width(self) -> int:
        return self.outer_radius - self.inner_radius

    def contains(self, x: Sequence[int]) -> bool:
        d = dist_inf(x, self.center)
        return self.inner_radius < d <= self.outer_radius

    def points(self) -> Iterator[Point]:
        outer = Cube(self.center, self.outer_radius, self.n_particles, self.dim)
        for x in cube_points(outer):
            if dist_inf(x, self.center) > self.inner_radius:
                yield x


def n_permutations(n_particles: int) -> int:
    return factorial(n_particles)
