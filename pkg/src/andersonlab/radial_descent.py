"""Discrete subharmonic functions and the radial-descent contraction bound.

Everything here lives on a plain cube in Z^n (no particle structure).  A
function f on the cube is (ell, q, S, c)-subharmonic when every point x
outside the exceptional set S whose ell-ball stays inside the domain
satisfies |f(x)| <= q * max over the sphere ||y-x|| = ell of |f(y)|, while
points of S satisfy the same bound with the max over the in-domain shell
ell <= ||y-x|| <= (1+c) ell.  Points near the domain boundary (ball exits
the domain) carry no constraint.

The descent bound: if the c*ell-neighborhood of S is covered by radial
annuli of total width W, then for admissible r,

    max over C_r |f|  <=  q^(floor((L - r - W)/ell) - 1) * max over C_L |f|.

The verifier reconstructs the constructive proof objects (blocked radii,
admissible radius set, the descending radius sequence) and checks both the
step-count inequality and the final contraction on concrete functions; a
failure on a function that passed the subharmonicity check would be a bug,
so counterexamples are dumped in full.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lattice import Annulus, Cube, GeometryError, Point, cube_points, dist_inf

#: Multiplicative slack on the verified inequalities; the underlying result
#: is exact in real arithmetic, this absorbs float rounding only.
FLOAT_SLACK = 1e-9


class SubharmonicityError(ValueError):
    """Raised on malformed specs or functions."""


@dataclass(frozen=True)
class SubharmonicSpec:
    """Parameters (ell, q, S, c) and the domain cube."""

    domain: Cube
    ell: int
    q: float
    c: float = 1.0
    exceptional: frozenset[Point] = frozenset()

    def __post_init__(self) -> None:
        if self.ell < 1:
            raise SubharmonicityError("ell must be a positive integer")
        if not 0 < self.q <= 1:
            raise SubharmonicityError("q must lie in (0, 1]")
        if self.c < 1:
            raise SubharmonicityError("c must be at least 1")
        bad = [x for x in self.exceptional if not self.domain.contains(x)]
        if bad:
            raise SubharmonicityError(f"exceptional points outside domain: {bad[:3]}")
        object.__setattr__(
            self, "exceptional", frozenset(tuple(map(int, x)) for x in self.exceptional)
        )

    @property
    def pad(self) -> int:
        """floor(c * ell): the neighborhood/shell padding radius."""
        return int(np.floor(self.c * self.ell + 1e-9))


def _offsets(n: int, lo: int, hi: int) -> np.ndarray:
    """All integer offsets with lo <= max-norm <= hi, shape (K, n)."""
    out = [
        o
        for o in itertools.product(range(-hi, hi + 1), repeat=n)
        if lo <= max(abs(v) for v in o) <= hi
    ]
    return np.array(out, dtype=np.int64).reshape(len(out), n)


def _radii_grid(cube: Cube) -> np.ndarray:
    axes = np.meshgrid(
        *(np.abs(np.arange(-cube.radius, cube.radius + 1)) for _ in range(cube.n_coords)),
        indexing="ij",
    )
    return np.maximum.reduce(axes)


def check_subharmonic(
    values: Sequence[float], spec: SubharmonicSpec
) -> tuple[bool, Point | None]:
    """Verify both subharmonicity clauses; returns (ok, first violation).

    ``values`` follows the cube_points order of the domain; the first
    violating point in that order is reported.  Threshold comparisons are
    exact (equality satisfies the bound).
    """
    cube = spec.domain
    n = cube.n_coords
    flat = np.abs(np.asarray(values, dtype=np.float64))
    if flat.shape != (cube.n_points,):
        raise SubharmonicityError(
            f"need {cube.n_points} values in cube_points order, got {flat.shape}"
        )
    radii = _radii_grid(cube).ravel()
    points = cube_points(cube)
    exc_flat = {i for i, p in enumerate(points) if p in spec.exceptional}

    violation = np.zeros(cube.n_points, dtype=bool)

    interior = np.flatnonzero(radii <= cube.radius - spec.ell)
    interior = np.array([i for i in interior if i not in exc_flat], dtype=np.int64)
    if interior.size:
        strides = np.array(
            [cube.side ** (n - 1 - a) for a in range(n)], dtype=np.int64
        )
        sphere = _offsets(n, spec.ell, spec.ell)
        flat_offsets = sphere @ strides
        neigh = flat[interior[:, None] + flat_offsets[None, :]]
        sphere_max = neigh.max(axis=1)
        violation[interior] = flat[interior] > spec.q * sphere_max

    shell = _offsets(n, spec.ell, spec.ell + spec.pad)
    for i in sorted(exc_flat):
        x = points[i]
        ys = np.asarray(x, dtype=np.int64)[None, :] + shell
        inside = np.abs(ys - np.asarray(cube.center)[None, :]).max(axis=1) <= cube.radius
        shell_max = 0.0
        if inside.any():
            idx = (ys[inside] - (np.asarray(cube.center) - cube.radius)) @ np.array(
                [cube.side ** (n - 1 - a) for a in range(n)]
            )
            shell_max = float(flat[idx].max())
        if flat[i] > spec.q * shell_max:
            violation[i] = True

    bad = np.flatnonzero(violation)
    if bad.size:
        return False, points[int(bad[0])]
    return True, None


# ---------------------------------------------------------------------------
# Annulus covers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnulusCover:
    """Concentric annuli covering the padded neighborhood of a point set."""

    annuli: tuple[Annulus, ...]

    @property
    def total_width(self) -> int:
        return sum(a.width for a in self.annuli)

    def covers_radius(self, r: int) -> bool:
        return any(a.inner_radius < r <= a.outer_radius for a in self.annuli)


def cover_neighborhood(
    exceptional: Sequence[Point], c: float, ell: int, center: Point
) -> AnnulusCover:
    """Minimal-width radial annulus cover of the c*ell-neighborhood of a set.

    Pads the radius of each exceptional point by floor(c*ell) on both sides,
    merges overlapping or adjacent runs, and verifies point-by-point that
    every lattice point within the padding of the set lands in an annulus.
    """
    pts = [tuple(map(int, x)) for x in exceptional]
    n = len(center)
    pad = int(np.floor(c * ell + 1e-9))
    if not pts:
        return AnnulusCover(())
    radii = sorted({dist_inf(x, center) for x in pts})
    intervals: list[list[int]] = []
    for rho in radii:
        lo, hi = max(0, rho - pad), rho + pad
        if intervals and lo <= intervals[-1][1] + 1:
            intervals[-1][1] = max(intervals[-1][1], hi)
        else:
            intervals.append([lo, hi])
    annuli = tuple(
        Annulus(tuple(center), lo - 1, hi, 1, n) for lo, hi in intervals
    )
    cover = AnnulusCover(annuli)

    for x in pts:
        for off in itertools.product(range(-pad, pad + 1), repeat=n):
            y = tuple(a + b for a, b in zip(x, off))
            assert cover.covers_radius(dist_inf(y, center)), (
                f"cover construction failed at {y}"
            )
    return cover


def descent_bound(L: int, r: int, ell: int, q: float, width: int) -> float:
    """Contraction factor q^(floor((L - r - width)/ell) - 1).

    Admissible r: the window [width + ell, L - width + ell], plus r = 0 (the
    full descent to the center, which the bound also covers).  The factor may
    exceed 1 near the top of the window; it is still returned (vacuous
    bound).
    """
    if not 0 < q <= 1:
        raise SubharmonicityError("q must lie in (0, 1]")
    if ell < 1:
        raise SubharmonicityError("ell must be positive")
    if r != 0 and not width + ell <= r <= L - width + ell:
        raise SubharmonicityError(
            f"r={r} outside the admissible window [{width + ell}, {L - width + ell}]"
        )
    exponent = int(np.floor((L - r - width) / ell)) - 1
    return float(q**exponent)


# ---------------------------------------------------------------------------
# Constructive verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DescentCheck:
    """Outcome of one radial-descent verification."""

    ok: bool
    steps: tuple[int, ...]
    n_steps: int
    step_lower_bound: float
    max_inner: float
    max_outer: float
    contraction: float
    gap_total: int
    blocked_width: int
    cover_width: int

    @property
    def slack(self) -> float:
        """log-slack of the final inequality (>= 0 when it holds)."""
        bound = self.contraction * self.max_outer
        if self.max_inner == 0:
            return np.inf
        return float(np.log(bound / self.max_inner))


def verify_descent(
    values: Sequence[float],
    spec: SubharmonicSpec,
    cover: AnnulusCover,
    r: int,
) -> DescentCheck:
    """Reconstruct the descent recursion and check it against a function.

    Blocked radii are the radii of exceptional points padded outward by
    floor(c*ell); admissible radii are the unblocked ones.  The sequence
    r_0 = L, r_n = max{admissible r' <= r_{n-1} - ell} descends until it
    would pass below r; with M' completed steps,

        max over C_r |f| <= q^M' * max over C_L |f|,
        M' >= (L - r - W_cover)/ell - 1,

    and the skipped-gap total is bounded by the blocked width, itself at
    most the cover width.  All five facts are checked; ok requires all.
    """
    cube = spec.domain
    L = cube.radius
    if r < 0 or r > L:
        raise SubharmonicityError("r must lie in [0, L]")
    if r != 0 and not cover.total_width + spec.ell <= r <= L - cover.total_width + spec.ell:
        raise SubharmonicityError("r outside the admissible window")
    ok_sub, witness = check_subharmonic(values, spec)
    if not ok_sub:
        raise SubharmonicityError(f"function is not subharmonic (violation at {witness})")

    blocked: set[int] = set()
    for x in spec.exceptional:
        rho = dist_inf(x, cube.center)
        blocked.update(range(rho, min(rho + spec.pad, L) + 1))
    admissible = sorted(set(range(L + 1)) - blocked)

    steps = [L]
    while True:
        target = steps[-1] - spec.ell
        cand = [a for a in admissible if a <= target]
        if not cand:
            break
        nxt = max(cand)
        if nxt < r:
            break
        steps.append(nxt)
    n_steps = len(steps) - 1

    gap_total = sum(
        steps[i - 1] - spec.ell - steps[i]
        for i in range(1, len(steps))
        if steps[i - 1] - spec.ell - steps[i] > 0
    )
    blocked_width = len(blocked)
    w_cover = cover.total_width

    flat = np.abs(np.asarray(values, dtype=np.float64))
    radii = _radii_grid(cube).ravel()
    max_outer = float(flat.max())
    max_inner = float(flat[radii <= r].max())
    contraction = float(spec.q**n_steps)

    step_lower_bound = (L - r - w_cover) / spec.ell - 1
    slack = 1.0 + FLOAT_SLACK
    checks = [
        all(a > b for a, b in zip(steps, steps[1:])),
        gap_total <= blocked_width,
        blocked_width <= w_cover,
        n_steps >= step_lower_bound,
        max_inner <= contraction * max_outer * slack,
        max_inner
        <= descent_bound(L, r, spec.ell, spec.q, w_cover) * max_outer * slack,
    ]
    return DescentCheck(
        ok=all(checks),
        steps=tuple(steps),
        n_steps=n_steps,
        step_lower_bound=step_lower_bound,
        max_inner=max_inner,
        max_outer=max_outer,
        contraction=contraction,
        gap_total=gap_total,
        blocked_width=blocked_width,
        cover_width=w_cover,
    )


# ---------------------------------------------------------------------------
# Guaranteed-subharmonic instance generator
# ---------------------------------------------------------------------------


def generate_subharmonic(
    spec: SubharmonicSpec, rng: np.random.Generator
) -> np.ndarray:
    """Random function satisfying the spec by construction.

    Unconstrained boundary-shell points get values in [0.5, 1]; every other
    point is assigned q * u * (max over its already-assigned sphere/shell)
    with u uniform in (0, 1], sweeping radii outside-in.  Since later
    assignments can only raise the relevant max, every constraint holds at
    the end.
    """
    cube = spec.domain
    n = cube.n_coords
    points = cube_points(cube)
    radii = _radii_grid(cube).ravel()
    center = np.asarray(cube.center, dtype=np.int64)
    strides = np.array([cube.side ** (n - 1 - a) for a in range(n)], dtype=np.int64)

    values = np.zeros(cube.n_points)
    assigned = np.zeros(cube.n_points, dtype=bool)

    order = sorted(range(cube.n_points), key=lambda i: (-radii[i], i))
    sphere = _offsets(n, spec.ell, spec.ell)
    shell = _offsets(n, spec.ell, spec.ell + spec.pad)

    for i in order:
        x = np.asarray(points[i], dtype=np.int64)
        if points[i] in spec.exceptional:
            offs = shell
        elif radii[i] > cube.radius - spec.ell:
            values[i] = rng.uniform(0.5, 1.0)
            assigned[i] = True
            continue
        else:
            offs = sphere
        ys = x[None, :] + offs
        inside = np.abs(ys - center[None, :]).max(axis=1) <= cube.radius
        ref = 0.0
        if inside.any():
            idx = (ys[inside] - (center - cube.radius)) @ strides
            known = assigned[idx]
            if known.any():
                ref = float(values[idx[known]].max())
        u = 1.0 - float(rng.random())  # uniform in (0, 1]
        values[i] = spec.q * ref * u
        assigned[i] = True
    return values


def random_instance(rng: np.random.Generator):
    """Random (spec, values, cover, r) tuple across dimensions 1..3."""
    n = int(rng.choice([1, 1, 2, 2, 3]))
    L = {1: int(rng.integers(8, 28)), 2: int(rng.integers(4, 10)), 3: int(rng.integers(2, 5))}[n]
    ell = int(rng.integers(1, {1: 4, 2: 3, 3: 2}[n]))
    q = float(rng.uniform(0.3, 0.9))
    c = float(rng.choice([1.0, 1.5, 2.0]))
    center = tuple(int(v) for v in rng.integers(-2, 3, n))
    domain = Cube(center, L, 1, n)

    exceptional: set[Point] = set()
    if rng.random() < 0.7:
        pts = cube_points(domain)
        for _ in range(int(rng.integers(1, 4))):
            exceptional.add(pts[int(rng.integers(len(pts)))])
    spec = SubharmonicSpec(domain, ell, q, c, frozenset(exceptional))
    values = generate_subharmonic(spec, rng)
    cover = cover_neighborhood(sorted(exceptional), c, ell, center)

    w = cover.total_width
    lo, hi = w + ell, L - w + ell
    choices = [0] + [r for r in range(lo, min(hi, L) + 1)]
    r = int(choices[int(rng.integers(len(choices)))]) if choices else 0
    if r != 0 and not lo <= r <= L - w + ell:
        r = 0
    return spec, values, cover, r


def counterexample_json(
    spec: SubharmonicSpec,
    values: Sequence[float],
    cover: AnnulusCover,
    r: int,
    check: DescentCheck | None,
) -> str:
    """Full reproducer for a failed descent check."""
    return json.dumps(
        {
            "domain": {
                "center": list(spec.domain.center),
                "radius": spec.domain.radius,
                "n": spec.domain.n_coords,
            },
            "ell": spec.ell,
            "q": spec.q,
            "c": spec.c,
            "exceptional": sorted(map(list, spec.exceptional)),
            "annuli": [
                [a.inner_radius, a.outer_radius] for a in cover.annuli
            ],
            "r": r,
            "values": list(map(float, values)),
            "check": None if check is None else check.__dict__ | {"steps": list(check.steps)},
        }
    )


def selftest(instances: int, seed: int) -> tuple[dict, list[str]]:
    """Generate instances, verify the bound on each, collect counterexamples.

    The bound is a theorem: the expected counterexample count is zero, and
    any entry in the returned list is a bug reproducer.
    """
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    failures: list[str] = []
    min_slack = np.inf
    step_margin = np.inf
    for _ in range(instances):
        spec, values, cover, r = random_instance(rng)
        check = verify_descent(values, spec, cover, r)
        if not check.ok:
            failures.append(counterexample_json(spec, values, cover, r, check))
        else:
            min_slack = min(min_slack, check.slack)
            step_margin = min(step_margin, check.n_steps - check.step_lower_bound)
    report = {
        "instances": instances,
        "seed": seed,
        "violations": len(failures),
        "min_log_slack": None if min_slack is np.inf else float(min_slack),
        "min_step_margin": None if step_margin is np.inf else float(step_margin),
    }
    return report, failures
