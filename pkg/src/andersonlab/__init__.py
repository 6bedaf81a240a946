"""andersonlab: a numerical laboratory for multi-particle Anderson models.

Finite-volume lattice Hamiltonians with IID random potential and short-range
interaction, exact spectral/Green-function machinery, scale-ladder
classification of resolvent decay, the radial-descent bound for discrete
subharmonic functions, and a deterministic Monte-Carlo harness that tests the
probabilistic estimates (eigenvalue concentration, double-singularity decay,
eigenfunction decay, dynamical moments) at desk scale.
"""

__version__ = "0.1.0"
