"""Kinetic Monte Carlo for 1D lattice gases with short- plus long-range interactions.

The package simulates adsorption/desorption dynamics on a periodic ring with
Arrhenius rates, using either direct microscopic samplers (SSA, n-fold/BKL,
null-event) or a two-level sampler that evolves block-spin variables on a
coarse grid and reconstructs microscopic detail per event.  Exact small-system
oracles (Gibbs enumeration, generator matrices, master-equation evolution)
back the test suite and the `validate` command.
"""

from .errors import AbsorbingStateError, ConfigurationError, OracleSizeError
from .lattice import LatticeSpec, CoarseSpec, coarsen, flip, cell_of, ring_distance
from .potentials import PotentialSpec, CoarseCoupling, coarse_coupling, hamiltonian, energy_diff
from .rates import RateModel, Variant

__version__ = "0.1.0"

__all__ = [
    "AbsorbingStateError",
    "ConfigurationError",
    "OracleSizeError",
    "LatticeSpec",
    "CoarseSpec",
    "coarsen",
    "flip",
    "cell_of",
    "ring_distance",
    "PotentialSpec",
    "CoarseCoupling",
    "coarse_coupling",
    "hamiltonian",
    "energy_diff",
    "RateModel",
    "Variant",
    "__version__",
]
