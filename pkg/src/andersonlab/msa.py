"""Scale-ladder classification of finite cubes.

The ladder L_{k+1} = floor(L_k^alpha) drives the whole analysis.  A cube of
radius L is "singular" at energy E when its Green function from the inner
region (radius floor(L^{1/alpha})) to the inner boundary exceeds the decay
threshold exp(-gamma(m, L, n)); it is "resonant" when the spectrum comes
closer to E than exp(-L^beta).  Existential energy quantifiers over an
interval are discretized to a uniform grid augmented with the operators'
eigenvalues in the interval, so every reported "exists E" probability is a
lower bound of the continuum event — the conservative direction when testing
upper bounds.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .hamiltonian import FiniteVolumeOperator, ModelSpec, assemble
from .lattice import (
    Cube,
    Point,
    boundary,
    cube_points,
    footprint_separation,
    point_index,
    sym_dist,
)
from .random_field import FieldSample
from .spectral import RESONANCE_GUARD, SpectralData, eigendecompose

DEFAULT_RESONANCE_BETA = 0.5

#: Above this many simultaneously singular cubes the pairwise-distant counter
#: falls back from exhaustive subset search to a greedy scan.
EXHAUSTIVE_COUNT_CAP = 12


@dataclass(frozen=True)
class ScaleLadder:
    """Length scales L_k with decay and probability exponents.

    ``interval`` is the energy window all existential quantifiers range over.
    """

    l0: int
    m: float
    p: float
    interval: tuple[float, float]
    alpha: float = 1.5
    k_max: int = 3

    def __post_init__(self) -> None:
        if self.l0 < 2:
            raise ValueError("l0 must be at least 2")
        if self.m <= 0 or self.p <= 0:
            raise ValueError("m and p must be positive")
        if not 1.0 < self.alpha < 2.0:
            raise ValueError("alpha must lie in (1, 2)")
        lo, hi = self.interval
        if hi < lo:
            raise ValueError("empty interval must be written as (a, a)")

    def radius(self, k: int) -> int:
        """L_k, with L_{k+1} = floor(L_k^alpha)."""
        if k < 0:
            raise ValueError("k must be non-negative")
        L = self.l0
        for _ in range(k):
            L = _snapped_floor(float(L) ** self.alpha)
        return L

    def radii(self) -> list[int]:
        return [self.radius(k) for k in range(self.k_max + 1)]

    def exponent_condition_ok(self, n_particles: int, dim: int, s: float) -> bool:
        """Whether p clears both induction thresholds for moment exponent s."""
        nd = n_particles * dim
        lower = max(
            2 * nd * self.alpha / (2 - self.alpha),
            (3 * nd * self.alpha + self.alpha * s) / 2,
        )
        return self.p > lower

    def to_config(self) -> dict:
        return {
            "l0": self.l0,
            "m": self.m,
            "p": self.p,
            "interval": list(self.interval),
            "alpha": self.alpha,
            "k_max": self.k_max,
        }


def _snapped_floor(x: float, eps: float = 1e-9) -> int:
    """floor(x), except values within eps below an integer snap up to it.

    Protects mathematically exact powers (8^(2/3) = 4, ...) from float
    drift; eps is far below the unit lattice spacing, so only exact cases
    are affected.
    """
    f = int(np.floor(x))
    return f + 1 if (f + 1) - x < eps else f


def gamma(m: float, L: int, n: int, n_total: int) -> float:
    """Decay exponent m * L * (1 + L^{-1/4})^(n_total - n + 1).

    ``n`` is the particle number of the cube being classified, ``n_total``
    the ambient particle count; the bound strengthens as n decreases.
    """
    if not 1 <= n <= n_total:
        raise ValueError(f"need 1 <= n <= n_total, got n={n}, n_total={n_total}")
    if L < 1:
        raise ValueError("L must be at least 1")
    if m <= 0:
        raise ValueError("m must be positive")
    return m * L * (1.0 + L ** (-0.25)) ** (n_total - n + 1)


def inner_region_radius(L: int, alpha: float) -> int:
    """floor(L^{1/alpha}); the source region of the singularity test."""
    if L == 0:
        return 0
    return _snapped_floor(float(L) ** (1.0 / alpha))


def default_grid_spacing(ladder: ScaleLadder, L: int, n_total: int) -> float:
    """Default energy-grid spacing exp(-gamma)/4, floored at 1e-6 |I|."""
    lo, hi = ladder.interval
    width = hi - lo
    h = float(np.exp(-gamma(ladder.m, L, n_total, n_total))) / 4.0
    return max(h, 1e-6 * width)


def energy_grid(
    interval: tuple[float, float],
    spacing: float,
    extra_energies: Iterable[float] = (),
) -> np.ndarray:
    """Uniform grid over the interval plus sorted extra points inside it.

    Zero-length intervals yield an empty grid: the discretized "exists E"
    event over an empty window is vacuously false.
    """
    lo, hi = interval
    if hi <= lo:
        return np.empty(0)
    if spacing <= 0:
        raise ValueError("grid spacing must be positive")
    n_steps = int(np.floor((hi - lo) / spacing))
    uniform = lo + spacing * np.arange(n_steps + 1)
    extras = np.asarray([e for e in extra_energies if lo <= e <= hi], dtype=np.float64)
    return np.unique(np.concatenate([uniform, [hi], extras]))


# ---------------------------------------------------------------------------
# Singularity / resonance verdicts
# ---------------------------------------------------------------------------


def _singularity_index_sets(sd: SpectralData, alpha: float):
    cube = sd.cube
    r_in = inner_region_radius(cube.radius, alpha)
    if r_in < 1:
        inner_idx = [point_index(cube, cube.center)]
    else:
        inner = Cube(cube.center, min(r_in, cube.radius), cube.n_particles, cube.dim)
        inner_idx = [point_index(cube, x) for x in cube_points(inner)]
    bnd_idx = [point_index(cube, x) for x in sorted(boundary(cube, "inner"))]
    return inner_idx, bnd_idx


def max_boundary_green(
    sd: SpectralData, energies: np.ndarray, alpha: float
) -> np.ndarray:
    """max over (inner region x, inner-boundary y) of |G(x, y; E)| per energy.

    Energies within the resonance guard of the spectrum get +inf.
    """
    inner_idx, bnd_idx = _singularity_index_sets(sd, alpha)
    rows = np.ascontiguousarray(sd.eigenvectors[inner_idx])
    cols = np.ascontiguousarray(sd.eigenvectors[bnd_idx])
    out = np.empty(len(energies))
    for i, e in enumerate(np.asarray(energies, dtype=np.float64)):
        gaps = sd.eigenvalues - e
        if np.abs(gaps).min() <= RESONANCE_GUARD:
            out[i] = np.inf
            continue
        block = (rows / gaps) @ cols.T
        out[i] = np.abs(block).max()
    return out


def singular_mask(
    sd: SpectralData,
    energies: np.ndarray,
    ladder: ScaleLadder,
    n: int | None = None,
    n_total: int | None = None,
) -> np.ndarray:
    """Boolean singularity verdicts over an energy array.

    Non-singular means the max inner-to-boundary Green entry is at most
    exp(-gamma(m, L, n)); resonant energies are singular by the guard.
    """
    n_cube = sd.operator.spec.n_particles if n is None else n
    nt = n_cube if n_total is None else n_total
    threshold = float(np.exp(-gamma(ladder.m, sd.cube.radius, n_cube, nt)))
    return max_boundary_green(sd, energies, ladder.alpha) > threshold


def classify_singular(
    sd: SpectralData,
    energy: float,
    ladder: ScaleLadder,
    n: int | None = None,
    n_total: int | None = None,
) -> bool:
    """True when the cube is singular at the energy (resonant implies singular)."""
    return bool(singular_mask(sd, np.array([energy]), ladder, n, n_total)[0])


def classify_resonant(
    sd: SpectralData,
    energy: float,
    L: int | None = None,
    beta: float = DEFAULT_RESONANCE_BETA,
) -> bool:
    """True when dist(spectrum, E) < exp(-L^beta); ties are non-resonant.

    The threshold scale L defaults to the cube radius; beta is the standard
    convention parameter (the estimate only needs the threshold to be
    sub-exponential in L).
    """
    scale = sd.cube.radius if L is None else L
    gap = float(np.abs(sd.eigenvalues - energy).min())
    return gap < float(np.exp(-float(scale) ** beta))


def resonant_mask(
    sd: SpectralData,
    energies: np.ndarray,
    L: int | None = None,
    beta: float = DEFAULT_RESONANCE_BETA,
) -> np.ndarray:
    scale = sd.cube.radius if L is None else L
    threshold = float(np.exp(-float(scale) ** beta))
    gaps = np.abs(
        np.asarray(energies, dtype=np.float64)[:, None] - sd.eigenvalues[None, :]
    ).min(axis=1)
    return gaps < threshold


# ---------------------------------------------------------------------------
# Interactive (PI/FI) decomposability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InteractiveVerdict:
    """FI, or PI with the witnessing particle bipartition."""

    partially_interactive: bool
    partition: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    @property
    def kind(self) -> str:
        return "PI" if self.partially_interactive else "FI"


def bipartitions(n_particles: int):
    """All unordered bipartitions of {0..n-1}, first block containing 0,
    in lexicographic order of the first block."""
    rest = range(1, n_particles)
    out = []
    for r in range(0, n_particles - 1):
        for extra in itertools.combinations(rest, r):
            first = (0,) + extra
            second = tuple(j for j in rest if j not in extra)
            out.append((first, second))
    out.sort()
    return out


def classify_interactive(cube: Cube, spec: ModelSpec) -> InteractiveVerdict:
    """PI when some particle bipartition has single-particle footprints
    separated by more than the interaction range, so the two groups cannot
    interact anywhere in the cube; FI otherwise.

    Returns the lexicographically first witnessing bipartition.
    """
    r0 = max(spec.interaction_range, 0)
    for first, second in bipartitions(cube.n_particles):
        if footprint_separation(cube, first, second) > r0:
            return InteractiveVerdict(True, (first, second))
    return InteractiveVerdict(False)


# ---------------------------------------------------------------------------
# Tunneling
# ---------------------------------------------------------------------------


def _subcube_centers(cube: Cube, sub_radius: int, stride: int = 1) -> list[Point]:
    """Centers whose radius-``sub_radius`` cube fits inside ``cube``."""
    reach = cube.radius - sub_radius
    if reach < 0:
        return []
    offsets = range(-reach, reach + 1, stride)
    return [
        tuple(c + o for c, o in zip(cube.center, off))
        for off in itertools.product(offsets, repeat=cube.n_coords)
    ]


def _max_pairwise_ok(centers: Sequence[Point], flags: np.ndarray, n_particles, threshold) -> bool:
    hot = [c for c, f in zip(centers, flags) if f]
    for i in range(len(hot)):
        for j in range(i + 1, len(hot)):
            if sym_dist(hot[i], hot[j], n_particles) > threshold:
                return True
    return False


def is_tunneling(
    cube: Cube,
    field_sample: FieldSample,
    spec: ModelSpec,
    ladder: ScaleLadder,
    k: int,
    grid_spacing: float | None = None,
    n_total: int | None = None,
) -> bool:
    """Whether the cube contains, for some grid energy in the interval, two
    distant singular sub-cubes at the previous scale.

    Sub-cubes have radius L_{k-1} and must be sym-distance more than
    2 * n_total * L_{k-1} apart; geometric infeasibility short-circuits to
    False.
    """
    if k < 1:
        raise ValueError("tunneling is defined for k >= 1 only")
    nt = spec.n_particles if n_total is None else n_total
    sub_radius = ladder.radius(k - 1)
    threshold = 2 * nt * sub_radius
    centers = _subcube_centers(cube, sub_radius)
    if len(centers) < 2:
        return False
    # cheap feasibility: the farthest candidate pair is 2*(L_k - sub) apart
    if 2 * (cube.radius - sub_radius) <= threshold:
        return False

    if grid_spacing is None:
        grid_spacing = default_grid_spacing(ladder, sub_radius, nt)

    sds = []
    lo, hi = ladder.interval
    extras: list[float] = []
    for v in centers:
        sub = Cube(v, sub_radius, cube.n_particles, cube.dim)
        sd = eigendecompose(assemble(sub, field_sample, spec))
        sds.append(sd)
        extras.extend(sd.eigenvalues_in(lo, hi).tolist())
    grid = energy_grid(ladder.interval, grid_spacing, extras)
    if grid.size == 0:
        return False

    masks = np.stack(
        [singular_mask(sd, grid, ladder, spec.n_particles, nt) for sd in sds]
    )
    for col in range(grid.size):
        flags = masks[:, col]
        if flags.sum() >= 2 and _max_pairwise_ok(centers, flags, cube.n_particles, threshold):
            return True
    return False


def is_partially_tunneling(
    cube: Cube,
    field_sample: FieldSample,
    spec: ModelSpec,
    ladder: ScaleLadder,
    k: int,
    grid_spacing: float | None = None,
) -> bool:
    """Whether some particle bipartition yields a factor cube (same radius,
    fewer particles) that is tunneling at scale k.

    The factor cubes keep radius L_k; their sub-cubes at radius L_{k-1} must
    be 2 * N * L_{k-1}-distant with N the full particle count.  (The printed
    product formula for this notion mixes radii L_k and L_{k-1}; radius L_k
    factors are used here, matching the left side.)
    """
    if cube.n_particles < 2:
        return False
    for first, second in bipartitions(cube.n_particles):
        for group in (first, second):
            sub_spec = spec.subsystem(len(group))
            factor = Cube(
                tuple(
                    itertools.chain.from_iterable(
                        cube.particle_center(j) for j in group
                    )
                ),
                cube.radius,
                len(group),
                cube.dim,
            )
            if is_tunneling(
                factor,
                field_sample,
                sub_spec,
                ladder,
                k,
                grid_spacing,
                n_total=spec.n_particles,
            ):
                return True
    return False


# ---------------------------------------------------------------------------
# Counters of simultaneously singular distant cubes
# ---------------------------------------------------------------------------


def _max_distant_subset(centers: list[Point], n_particles: int, threshold: float) -> int:
    """Largest subset of centers with all pairwise sym-distances > threshold.

    Exhaustive bitmask search up to EXHAUSTIVE_COUNT_CAP candidates, greedy
    (enumeration order) beyond.
    """
    n = len(centers)
    if n == 0:
        return 0
    compat = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            ok = sym_dist(centers[i], centers[j], n_particles) > threshold
            compat[i, j] = compat[j, i] = ok
    if n <= EXHAUSTIVE_COUNT_CAP:
        best = 1
        for mask in range(1, 1 << n):
            members = [i for i in range(n) if mask >> i & 1]
            if len(members) <= best:
                continue
            if all(
                compat[a, b] for a, b in itertools.combinations(members, 2)
            ):
                best = len(members)
        return best
    chosen: list[int] = []
    for i in range(n):
        if all(compat[i, j] for j in chosen):
            chosen.append(i)
    return len(chosen)


def count_distant_singular(
    big_cube: Cube,
    field_sample: FieldSample,
    spec: ModelSpec,
    ladder: ScaleLadder,
    k: int,
    kind: str,
    grid_spacing: float | None = None,
    center_stride: int | None = None,
) -> int:
    """Maximal number over grid energies of pairwise 2*N*L_k-distant cubes of
    radius L_k of the given interactive kind ("PI" or "FI") inside
    ``big_cube`` that are simultaneously singular.

    Candidate centers live on a sub-lattice of the admissible region with the
    given stride (default L_k) — a coverage/effort tradeoff recorded with the
    result by callers.
    """
    if kind not in ("PI", "FI"):
        raise ValueError("kind must be 'PI' or 'FI'")
    if k + 1 > ladder.k_max:
        raise ValueError("k+1 exceeds the ladder's k_max")
    sub_radius = ladder.radius(k)
    threshold = 2 * spec.n_particles * sub_radius
    stride = max(1, sub_radius) if center_stride is None else center_stride
    centers_all = _subcube_centers(big_cube, sub_radius, stride)
    centers = []
    sds = []
    lo, hi = ladder.interval
    extras: list[float] = []
    for v in centers_all:
        sub = Cube(v, sub_radius, big_cube.n_particles, big_cube.dim)
        if classify_interactive(sub, spec).kind != kind:
            continue
        sd = eigendecompose(assemble(sub, field_sample, spec))
        centers.append(v)
        sds.append(sd)
        extras.extend(sd.eigenvalues_in(lo, hi).tolist())
    if not centers:
        return 0
    if grid_spacing is None:
        grid_spacing = default_grid_spacing(ladder, sub_radius, spec.n_particles)
    grid = energy_grid(ladder.interval, grid_spacing, extras)
    if grid.size == 0:
        return 0
    masks = np.stack([singular_mask(sd, grid, ladder) for sd in sds])
    best = 0
    for col in range(grid.size):
        hot = [centers[i] for i in range(len(centers)) if masks[i, col]]
        if len(hot) > best:
            best = max(best, _max_distant_subset(hot, spec.n_particles, threshold))
    return best


# ---------------------------------------------------------------------------
# Verdict records
# ---------------------------------------------------------------------------


def verdict_record(
    cube: Cube,
    energy: float,
    singular: bool,
    resonant: bool,
    interactive: InteractiveVerdict,
    ladder: ScaleLadder,
    seed: int,
    grid_spacing: float | None,
    beta: float = DEFAULT_RESONANCE_BETA,
) -> str:
    """One JSON line with the verdict and the full parameter echo."""
    return json.dumps(
        {
            "center": list(cube.center),
            "radius": cube.radius,
            "n_particles": cube.n_particles,
            "dim": cube.dim,
            "energy": energy,
            "singular": singular,
            "resonant": resonant,
            "interactive": interactive.kind,
            "partition": list(map(list, interactive.partition))
            if interactive.partition
            else None,
            "seed": seed,
            "grid_spacing": grid_spacing,
            "beta": beta,
            "ladder": ladder.to_config(),
        }
    )
