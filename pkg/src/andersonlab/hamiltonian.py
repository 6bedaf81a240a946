"""Finite-volume multi-particle Hamiltonians with Dirichlet truncation.

The operator on a cube C acts as

    (H psi)(x) = sum_{j, |y|=1, x + e_j y in C} psi(x with particle j shifted)
                 + [ g * sum_j V(x_j) + U(x) ] * psi(x),

i.e. the kinetic part is the pure neighbor-sum Laplacian (no diagonal term),
hopping entries are exactly 1, and hops leaving the cube are dropped
(Dirichlet).  The potential couples every particle to the same scalar field
V on Z^d, and U is a bounded two-body interaction of finite range measured
in the max-norm.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.io import mmwrite

from .lattice import Cube, GeometryError, Point, cube_points, dist_inf, footprint_sites
from .random_field import FieldDistribution, FieldSample, GaussianField

#: Largest matrix dimension materialized densely; the sparse neighbor list is
#: kept for matrix-vector products regardless.
DENSE_DIMENSION_CAP = 20_000


class FieldCoverageError(ValueError):
    """Raised when a field sample does not cover a cube's footprint."""


@dataclass(frozen=True)
class ModelSpec:
    """Model parameters: particle count, dimension, disorder amplitude,
    field distribution, and the two-body interaction.

    ``u2`` lists the interaction value at inter-particle max-norm distance
    0, 1, ..., r0; an empty tuple means no interaction.  The finite-range and
    boundedness constraints hold by construction.
    """

    n_particles: int
    dim: int
    g: float
    distribution: FieldDistribution = field(default_factory=GaussianField)
    u2: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.n_particles < 1 or self.dim < 1:
            raise ValueError("n_particles and dim must be positive")
        object.__setattr__(self, "u2", tuple(float(v) for v in self.u2))

    @property
    def interaction_range(self) -> int:
        """r0; -1 when there is no interaction at all."""
        return len(self.u2) - 1

    def u2_at(self, r: int) -> float:
        return self.u2[r] if 0 <= r < len(self.u2) else 0.0

    def with_g(self, g: float) -> "ModelSpec":
        return replace(self, g=float(g))

    def subsystem(self, n_particles: int) -> "ModelSpec":
        """Same single-particle data for a smaller particle number."""
        return replace(self, n_particles=n_particles)


def interaction_energy(x: Sequence[int], spec: ModelSpec) -> float:
    """Sum over unordered particle pairs of u2 at their max-norm distance."""
    d = spec.dim
    total = 0.0
    for i in range(spec.n_particles):
        xi = x[i * d : (i + 1) * d]
        for j in range(i + 1, spec.n_particles):
            total += spec.u2_at(dist_inf(xi, x[j * d : (j + 1) * d]))
    return total


@dataclass(frozen=True)
class FiniteVolumeOperator:
    """H = Delta + g V + U restricted to a cube, in cube_points index order."""

    cube: Cube
    spec: ModelSpec
    field_sample: FieldSample
    diagonal: np.ndarray
    hopping: sp.csr_matrix

    @property
    def dimension(self) -> int:
        return self.cube.n_points

    def dense(self) -> np.ndarray:
        if self.dimension > DENSE_DIMENSION_CAP:
            raise ValueError(
                f"dimension {self.dimension} exceeds dense cap {DENSE_DIMENSION_CAP}"
            )
        h = self.hopping.toarray().astype(np.float64)
        np.fill_diagonal(h, self.diagonal)
        return h

    def matvec(self, psi: np.ndarray) -> np.ndarray:
        return self.hopping @ psi + self.diagonal * psi

    def norm_bound(self) -> float:
        """Crude upper bound on ||H||: max row sum."""
        return float(np.abs(self.diagonal).max(initial=0.0) + 2 * self.cube.n_coords)


def assemble(
    cube: Cube,
    field_sample: FieldSample,
    spec: ModelSpec,
    include_hopping: bool = True,
) -> FiniteVolumeOperator:
    """Build the finite-volume operator over a cube from a sampled field.

    ``include_hopping=False`` suppresses the Laplacian (diagonal-only test
    hook).  The field must cover the cube's single-particle footprint.
    """
    if cube.n_particles != spec.n_particles or cube.dim != spec.dim:
        raise GeometryError("cube and model spec disagree on (n_particles, dim)")
    required = footprint_sites(cube)
    if not field_sample.covers(required):
        missing = [s for s in required if not field_sample.covers([s])][:3]
        raise FieldCoverageError(
            f"field sample does not cover the cube footprint (e.g. {missing})"
        )

    points = cube_points(cube)
    n = len(points)
    d = spec.dim

    diagonal = np.empty(n, dtype=np.float64)
    for idx, x in enumerate(points):
        v = sum(
            field_sample.value(x[j * d : (j + 1) * d])
            for j in range(spec.n_particles)
        )
        diagonal[idx] = spec.g * v + interaction_energy(x, spec)

    rows: list[int] = []
    cols: list[int] = []
    if include_hopping:
        # index strides of the box enumeration: bumping coordinate a by one
        # moves the flat index by side^(n_coords-1-a)
        side = cube.side
        strides = [side ** (cube.n_coords - 1 - a) for a in range(cube.n_coords)]
        low = [c - cube.radius for c in cube.center]
        high = [c + cube.radius for c in cube.center]
        for idx, x in enumerate(points):
            for a in range(cube.n_coords):
                if x[a] < high[a]:
                    rows.append(idx)
                    cols.append(idx + strides[a])
                if x[a] > low[a]:
                    rows.append(idx)
                    cols.append(idx - strides[a])
    hopping = sp.csr_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(n, n), dtype=np.float64
    )
    return FiniteVolumeOperator(cube, spec, field_sample, diagonal, hopping)


def sample_field_for(
    cube: Cube, spec: ModelSpec, seed: int, extra_sites: Sequence[Point] = ()
) -> FieldSample:
    """Sample the field over a cube's footprint (plus extras) in canonical
    sorted-site order."""
    from .random_field import sample_field

    sites = sorted(set(footprint_sites(cube)) | set(map(tuple, extra_sites)))
    return sample_field(sites, spec.distribution, seed)


def write_matrix_market(op: FiniteVolumeOperator, path: str) -> None:
    """Export H in Matrix Market coordinate text format for cross-checking."""
    h = op.hopping.tolil(copy=True)
    h.setdiag(op.diagonal)
    mmwrite(path, h.tocoo(), field="real", symmetry="general")
