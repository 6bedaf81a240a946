import itertools

import numpy as np
import pytest

from andersonlab.hamiltonian import ModelSpec, assemble, sample_field_for
from andersonlab.lattice import Cube, footprint_separation
from andersonlab.msa import (
    ScaleLadder,
    bipartitions,
    classify_interactive,
    classify_resonant,
    classify_singular,
    count_distant_singular,
    default_grid_spacing,
    energy_grid,
    gamma,
    inner_region_radius,
    is_tunneling,
    max_boundary_green,
    singular_mask,
    verdict_record,
)
from andersonlab.random_field import FieldSample, GaussianField
from andersonlab.spectral import eigendecompose


def ladder(l0=5, m=1.0, p=4.0, interval=(-2.0, 2.0), **kw):
    return ScaleLadder(l0, m, p, interval, **kw)


def constant_field_on(cube, value=0.0, extra=()):
    from andersonlab.lattice import footprint_sites

    sites = tuple(sorted(set(footprint_sites(cube)) | set(extra)))
    return FieldSample(sites, np.full(len(sites), value), seed=0)


def test_ladder_radii():
    lad = ladder(l0=8)
    assert lad.radius(0) == 8
    assert lad.radius(1) == 22  # floor(8^1.5)
    assert lad.radius(2) == 103  # floor(22^1.5)
    with pytest.raises(ValueError):
        ScaleLadder(1, 1.0, 4.0, (-1, 1))


def test_ladder_exponent_condition():
    # alpha=3/2: thresholds 6Nd and 2.25Nd + 0.75s; N=d=1, s=0 -> p > 6
    assert ladder(p=6.1).exponent_condition_ok(1, 1, 0.0)
    assert not ladder(p=5.9).exponent_condition_ok(1, 1, 0.0)
    # s=8 raises the moment threshold to 2.25 + 6 = 8.25
    assert not ladder(p=8.0).exponent_condition_ok(1, 1, 8.0)
    assert ladder(p=8.3).exponent_condition_ok(1, 1, 8.0)


def test_gamma_exact_values():
    # 16^{-1/4} = 1/2
    assert gamma(1.0, 16, 2, 2) == pytest.approx(24.0, abs=1e-12)
    assert gamma(1.0, 16, 1, 2) == pytest.approx(36.0, abs=1e-12)


def test_gamma_exceeds_mL():
    rng = np.random.default_rng(3)
    for _ in range(50):
        m = float(rng.uniform(0.1, 3))
        L = int(rng.integers(1, 60))
        n_total = int(rng.integers(1, 5))
        n = int(rng.integers(1, n_total + 1))
        assert gamma(m, L, n, n_total) > m * L
    with pytest.raises(ValueError):
        gamma(1.0, 10, 3, 2)


def test_inner_region_radius():
    assert inner_region_radius(8, 1.5) == 4
    assert inner_region_radius(5, 1.5) == 2
    assert inner_region_radius(0, 1.5) == 0


def test_energy_grid():
    g = energy_grid((-1.0, 1.0), 0.5, extra_energies=[0.123, 5.0])
    assert g[0] == -1.0 and g[-1] == 1.0
    assert 0.123 in g and 5.0 not in g
    assert energy_grid((1.0, 1.0), 0.5).size == 0


def test_default_grid_spacing_floor():
    lad = ladder(l0=8, m=1.0, interval=(-2.0, 2.0))
    # exp(-gamma(1, 8, 1, 1))/4 is far below the 1e-6*|I| floor
    assert default_grid_spacing(lad, 8, 1) == pytest.approx(4e-6)
    small = ladder(l0=2, m=0.1, interval=(-2.0, 2.0))
    expected = np.exp(-gamma(0.1, 2, 1, 1)) / 4
    assert default_grid_spacing(small, 2, 1) == pytest.approx(expected)


def test_strong_disorder_midgap_nonsingular():
    # diagonal-dominant regime: off-diagonal resolvent entries suppressed
    cube = Cube((0,), 4, 1, 1)
    spec = ModelSpec(1, 1, 1000.0)
    field = sample_field_for(cube, spec, seed=1)
    sd = eigendecompose(assemble(cube, field, spec))
    gaps = np.diff(sd.eigenvalues)
    i = int(np.argmax(gaps))
    e_mid = float((sd.eigenvalues[i] + sd.eigenvalues[i + 1]) / 2)
    lad = ladder(interval=(e_mid - 1, e_mid + 1))
    assert not classify_singular(sd, e_mid, lad)


def test_eigenvalue_energy_is_singular():
    cube = Cube((0,), 3, 1, 1)
    spec = ModelSpec(1, 1, 1.0)
    sd = eigendecompose(assemble(cube, sample_field_for(cube, spec, 2), spec))
    assert classify_singular(sd, float(sd.eigenvalues[3]), ladder())


def test_single_point_cube_inner_set():
    cube = Cube((0,), 0, 1, 1)
    spec = ModelSpec(1, 1, 1.0)
    sd = eigendecompose(assemble(cube, sample_field_for(cube, spec, 3), spec))
    v = float(sd.eigenvalues[0])
    got = max_boundary_green(sd, np.array([v + 2.0]), 1.5)[0]
    assert got == pytest.approx(abs(1 / (v - (v + 2.0))), rel=1e-12)


def test_weak_disorder_band_energy_singular():
    cube = Cube((0,), 6, 1, 1)
    spec = ModelSpec(1, 1, 0.05)
    sd = eigendecompose(assemble(cube, sample_field_for(cube, spec, 4), spec))
    # mid-band energy of a nearly free path: resolvent decays too slowly
    assert classify_singular(sd, 0.05123, ladder(m=1.0))


def test_resonant_classification():
    cube = Cube((0,), 3, 1, 1)
    spec = ModelSpec(1, 1, 1.0)
    sd = eigendecompose(assemble(cube, sample_field_for(cube, spec, 5), spec))
    far = float(sd.eigenvalues[-1] + 2.0)
    assert not classify_resonant(sd, far, beta=0.5)
    assert classify_resonant(sd, float(sd.eigenvalues[0]), beta=0.5)


def test_resonant_tie_is_nonresonant():
    # zero potential, hopping off: every eigenvalue is exactly 0, so an
    # energy at exactly the threshold distance exercises the strict <
    cube = Cube((0,), 2, 1, 1)
    spec = ModelSpec(1, 1, 1.0)
    field = constant_field_on(cube, 0.0)
    sd = eigendecompose(assemble(cube, field, spec, include_hopping=False))
    threshold = float(np.exp(-2.0**0.5))
    assert not classify_resonant(sd, threshold, beta=0.5)
    assert classify_resonant(sd, np.nextafter(threshold, 0.0), beta=0.5)


def test_free_laplacian_outside_band_decay():
    # measured max boundary Green entry decays exponentially in L
    spec = ModelSpec(1, 1, 0.0)
    E = 3.0  # outside [-2, 2] with margin 1
    logs = []
    for L in (4, 6, 8, 10, 12):
        cube = Cube((0,), L, 1, 1)
        sd = eigendecompose(assemble(cube, sample_field_for(cube, spec, 7), spec))
        val = max_boundary_green(sd, np.array([E]), 1.5)[0]
        logs.append(-np.log(val))
    slope = np.polyfit([4, 6, 8, 10, 12], logs, 1)[0]
    assert slope > 0


def test_bipartitions_order():
    assert bipartitions(2) == [((0,), (1,))]
    assert bipartitions(3) == [((0,), (1, 2)), ((0, 1), (2,)), ((0, 2), (1,))]


def test_classify_interactive_examples():
    spec = ModelSpec(2, 1, 1.0, GaussianField(), (1.0, 1.0, 1.0))  # r0=2
    far = Cube((0, 100), 3, 2, 1)
    v = classify_interactive(far, spec)
    assert v.kind == "PI" and v.partition == ((0,), (1,))
    diag = Cube((5, 5), 3, 2, 1)
    assert classify_interactive(diag, spec).kind == "FI"
    no_interaction = ModelSpec(2, 1, 1.0)  # r0 = -1, treated as 0
    assert classify_interactive(far, no_interaction).kind == "PI"


def _interactive_brute(cube, spec):
    r0 = max(spec.interaction_range, 0)
    idx = range(cube.n_particles)
    for r in range(1, cube.n_particles):
        for first in itertools.combinations(idx, r):
            second = tuple(j for j in idx if j not in first)
            if footprint_separation(cube, first, second) > r0:
                return True
    return False


@pytest.mark.parametrize("n", [2, 3, 4])
def test_classify_interactive_matches_bruteforce(n):
    rng = np.random.default_rng(n)
    spec = ModelSpec(n, 1, 1.0, GaussianField(), (1.0, 1.0))
    for _ in range(60):
        center = tuple(int(c) for c in rng.integers(-12, 13, n))
        cube = Cube(center, int(rng.integers(1, 4)), n, 1)
        got = classify_interactive(cube, spec).partially_interactive
        assert got == _interactive_brute(cube, spec)


def two_well_field(big_cube, well_sites, depth):
    from andersonlab.lattice import footprint_sites

    sites = tuple(sorted(footprint_sites(big_cube)))
    values = np.zeros(len(sites))
    for i, s in enumerate(sites):
        if s in well_sites:
            values[i] = depth
    return FieldSample(sites, values, seed=0)


def test_tunneling_empty_interval_false():
    lad = ScaleLadder(5, 1.0, 4.0, (1.0, 1.0))
    big = Cube((0,), 11, 1, 1)
    spec = ModelSpec(1, 1, 1.0)
    field = constant_field_on(big)
    assert not is_tunneling(big, field, spec, lad, k=1)


def test_tunneling_geometrically_impossible():
    # N=2: max center separation 2*(11-5)=12 <= 2*2*5=20
    lad = ScaleLadder(5, 1.0, 4.0, (-2.0, 2.0))
    big = Cube((0, 0), 11, 2, 1)
    spec = ModelSpec(2, 1, 1.0)
    field = constant_field_on(big)
    assert not is_tunneling(big, field, spec, lad, k=1)


def test_tunneling_two_wells_true():
    lad = ScaleLadder(5, 1.0, 4.0, (-60.0, -20.0))
    big = Cube((0,), 11, 1, 1)
    spec = ModelSpec(1, 1, 1.0)
    field = two_well_field(big, {(-6,), (6,)}, depth=-40.0)
    assert is_tunneling(big, field, spec, lad, k=1, grid_spacing=0.5)


def test_count_distant_singular_cases():
    lad = ScaleLadder(5, 1.0, 4.0, (-60.0, -20.0), k_max=1)
    big = Cube((0,), 11, 1, 1)
    spec = ModelSpec(1, 1, 1.0)

    quiet = ScaleLadder(5, 1.0, 4.0, (50.0, 51.0), k_max=1)
    field0 = constant_field_on(big)
    assert (
        count_distant_singular(big, field0, spec, quiet, 0, "FI", grid_spacing=0.25, center_stride=1)
        == 0
    )

    one_well = two_well_field(big, {(0,)}, depth=-40.0)
    assert (
        count_distant_singular(big, one_well, spec, lad, 0, "FI", grid_spacing=0.5, center_stride=1)
        == 1
    )

    two_wells = two_well_field(big, {(-6,), (6,)}, depth=-40.0)
    assert (
        count_distant_singular(big, two_wells, spec, lad, 0, "FI", grid_spacing=0.5, center_stride=1)
        == 2
    )


def test_count_monotone_in_m():
    big = Cube((0,), 11, 1, 1)
    spec = ModelSpec(1, 1, 1.0)
    field = sample_field_for(big, spec, seed=8)
    counts = []
    for m in (0.2, 0.5, 1.0, 2.0):
        lad = ScaleLadder(5, m, 4.0, (-2.0, 2.0), k_max=1)
        counts.append(
            count_distant_singular(big, field, spec, lad, 0, "FI", grid_spacing=0.2, center_stride=2)
        )
    assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_verdict_record_roundtrip():
    import json

    cube = Cube((0, 0), 2, 2, 1)
    spec = ModelSpec(2, 1, 1.0, GaussianField(), (1.0,))
    rec = json.loads(
        verdict_record(
            cube,
            0.5,
            True,
            False,
            classify_interactive(cube, spec),
            ladder(),
            seed=42,
            grid_spacing=0.01,
        )
    )
    assert rec["singular"] is True and rec["interactive"] == "FI"
    assert rec["ladder"]["l0"] == 5 and rec["seed"] == 42
