"""Samplers for the IID random potential and its sample-mean decomposition.

Randomness contract: every draw comes from a Philox4x64-10 counter-based
generator keyed directly by a 64-bit seed, so a (region order, seed) pair
reproduces values bit-exactly.  Seeds for parallel trials are derived
hierarchically from a master seed via :func:`derive_seed`, which makes trial
streams independent of worker count and completion order.

The sample mean ``xi_Q`` of the field over a site set Q, and the fluctuations
``eta_x = V(x) - xi_Q``, carry the eigenvalue-concentration structure: for a
Gaussian IID field with unit variance, xi_Q is Normal(mean, 1/|Q|),
independent of the fluctuations, with density bounded by
``sqrt(|Q|/(2*pi))``.  That density bound is the Lipschitz concentration
modulus shipped here; other distributions may attach their own modulus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import sqrt, tau
from typing import Sequence

import numpy as np

from .lattice import Point

MEAN_RECONSTRUCTION_TOL = 1e-12


class FieldError(ValueError):
    """Raised on invalid field regions or unsupported distribution queries."""


@dataclass(frozen=True)
class GaussianField:
    """IID Gaussian marginal with the given mean and variance."""

    mean: float = 0.0
    variance: float = 1.0

    def __post_init__(self) -> None:
        if self.variance <= 0:
            raise FieldError("variance must be positive")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.mean + sqrt(self.variance) * rng.standard_normal(n)

    def modulus(self, t: float, radius: int, dim: int) -> float:
        """Concentration modulus nu_R(t) for sample means over regions of
        max-norm diameter <= radius in Z^d.

        Such a region has at most (radius+1)^d sites, and the modulus is the
        worst case over admissible regions, so |Q| = (radius+1)^d enters the
        density bound.  Lipschitz in t with Hoelder parameters (A = d/2,
        b = 1) in the R^A * |t|^b normal form.
        """
        q_size = (radius + 1) ** dim
        return xi_density_bound(self, q_size) * abs(t)

    def to_config(self) -> dict:
        return {"kind": "gaussian", "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class UniformField:
    """IID uniform marginal on [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise FieldError("uniform field needs lo < hi")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, n)

    def modulus(self, t: float, radius: int, dim: int) -> float:
        raise FieldError(
            "no sample-mean concentration modulus is shipped for the uniform "
            "field; attach a custom distribution with a modulus method"
        )

    def to_config(self) -> dict:
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


FieldDistribution = GaussianField | UniformField


def distribution_from_config(cfg: dict) -> FieldDistribution:
    kind = cfg.get("kind")
    if kind == "gaussian":
        return GaussianField(float(cfg.get("mean", 0.0)), float(cfg.get("variance", 1.0)))
    if kind == "uniform":
        return UniformField(float(cfg["lo"]), float(cfg["hi"]))
    raise FieldError(f"unknown distribution kind: {kind!r}")


def derive_seed(master_seed: int, *path: int) -> int:
    """Deterministic 64-bit child seed for a (master, index path) pair."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


@dataclass(frozen=True)
class FieldSample:
    """One realization of the field on a finite region of Z^d.

    ``sites`` fixes the draw order; regenerating with the same (sites, seed,
    distribution) reproduces ``values`` bit-exactly.
    """

    sites: tuple[Point, ...]
    values: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if len(self.sites) != len(self.values):
            raise FieldError("one value per site required")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        object.__setattr__(
            self, "_index", {s: i for i, s in enumerate(self.sites)}
        )

    def value(self, site: Point) -> float:
        return float(self.values[self._index[site]])

    def covers(self, sites: Sequence[Point]) -> bool:
        return all(s in self._index for s in sites)

    def values_at(self, sites: Sequence[Point]) -> np.ndarray:
        return self.values[[self._index[s] for s in sites]]

    def shifted(self, offset: float) -> "FieldSample":
        return FieldSample(self.sites, self.values + offset, self.seed)

    def to_json(self) -> str:
        return json.dumps(
            {
                "sites": [list(s) for s in self.sites],
                "values": self.values.tolist(),
                "seed": self.seed,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FieldSample":
        obj = json.loads(text)
        return cls(
            tuple(tuple(s) for s in obj["sites"]),
            np.array(obj["values"], dtype=np.float64),
            int(obj["seed"]),
        )


def sample_field(
    region: Sequence[Point], distribution: FieldDistribution, seed: int
) -> FieldSample:
    """IID draws over the region, one per site, in the region's given order."""
    sites = tuple(tuple(int(c) for c in s) for s in region)
    if not sites:
        raise FieldError("region must be nonempty")
    if len(set(sites)) != len(sites):
        raise FieldError("region contains duplicate sites")
    values = distribution.draw(_generator(seed), len(sites))
    return FieldSample(sites, values, int(seed))


@dataclass(frozen=True)
class MeanFluctuationDecomposition:
    """Sample mean xi over Q and per-site fluctuations eta with sum zero."""

    q_sites: tuple[Point, ...]
    xi: float
    eta: np.ndarray

    def eta_at(self, site: Point) -> float:
        return float(self.eta[self.q_sites.index(site)])

    def reconstruct(self) -> np.ndarray:
        return self.xi + self.eta


def decompose(sample: FieldSample, q_sites: Sequence[Point]) -> MeanFluctuationDecomposition:
    """Split the field on Q into its sample mean and fluctuations."""
    q = tuple(tuple(int(c) for c in s) for s in q_sites)
    if not q:
        raise FieldError("Q must be nonempty")
    if not sample.covers(q):
        raise FieldError("Q is not contained in the sampled region")
    vals = sample.values_at(q)
    xi = float(vals.mean())
    eta = vals - xi
    assert abs(eta.sum()) <= MEAN_RECONSTRUCTION_TOL * len(q)
    return MeanFluctuationDecomposition(q, xi, eta)


def resample_mean(
    sample: FieldSample,
    q_sites: Sequence[Point],
    distribution: GaussianField,
    seed: int,
) -> FieldSample:
    """Redraw the sample mean over Q while freezing the fluctuations and the
    field outside Q.

    This is the operational form of conditioning on the sigma-algebra
    generated by {eta_x, x in Q} and {V(y), y outside Q}: for the Gaussian
    IID field the mean is independent of that sigma-algebra and distributed
    Normal(mean, variance/|Q|).  Only implemented for the Gaussian case.
    """
    if not isinstance(distribution, GaussianField):
        raise FieldError("conditional mean resampling is Gaussian-only")
    dec = decompose(sample, q_sites)
    rng = _generator(seed)
    new_xi = distribution.mean + sqrt(distribution.variance / len(dec.q_sites)) * float(
        rng.standard_normal()
    )
    values = sample.values.copy()
    for site, eta in zip(dec.q_sites, dec.eta):
        values[sample.sites.index(site)] = new_xi + eta
    return FieldSample(sample.sites, values, sample.seed)


def xi_density_bound(distribution: FieldDistribution, q_size: int) -> float:
    """Uniform bound sqrt(|Q|/(2*pi)) on the density of the sample mean over
    a |Q|-site region, for the unit-variance Gaussian field."""
    if not isinstance(distribution, GaussianField):
        raise FieldError("density bound available only for the Gaussian field")
    if distribution.variance != 1.0:
        raise FieldError("density bound formula requires unit variance")
    if q_size < 1:
        raise FieldError("Q size must be positive")
    return sqrt(q_size) / sqrt(tau)
