"""Periodic 1D lattice, occupancy configurations and block-spin projection.

A microscopic configuration is a length-N numpy array with entries in {0, 1}
(vacant/occupied).  Coarse graining partitions the ring into M = N/q
contiguous cells C_k = {k*q, ..., (k+1)*q - 1} and records the block spin
eta(k) = sum of occupancies over C_k.  Types carry a dimension field for
forward compatibility, but only d = 1 is implemented.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

# Cached observables (coverage counters, block spins) are rebuilt from scratch
# after this many events to bound accumulated drift.
RECOMPUTE_INTERVAL = 1 << 20


@dataclass(frozen=True)
class LatticeSpec:
    """Periodic lattice with n sites per dimension; N = n**d total sites."""

    n: int
    d: int = 1

    def __post_init__(self):
        if self.d != 1:
            raise ConfigurationError(f"only d=1 lattices are implemented, got d={self.d}")
        if self.n < 2:
            raise ConfigurationError(f"need at least 2 sites, got n={self.n}")

    @property
    def num_sites(self) -> int:
        return self.n**self.d


@dataclass(frozen=True)
class CoarseSpec:
    """Partition of a ring of n sites into M = n/q contiguous cells of q sites."""

    n: int
    q: int
    num_cells: int = field(init=False)

    def __post_init__(self):
        if self.q < 1 or self.q > self.n:
            raise ConfigurationError(f"block size q={self.q} outside [1, n={self.n}]")
        if self.n % self.q != 0:
            raise ConfigurationError(f"block size q={self.q} does not divide n={self.n}")
        object.__setattr__(self, "num_cells", self.n // self.q)


def ring_distance(x: int, y: int, n: int) -> int:
    """Minimum-image distance |x - y| on a ring of n sites."""
    r = abs(x - y) % n
    return min(r, n - r)


def validate_config(occ: np.ndarray) -> None:
    """Check that an occupancy array is a valid {0,1} configuration."""
    if occ.ndim != 1 or occ.size < 2:
        raise ConfigurationError("configuration must be a 1D array of length >= 2")
    if not np.isin(occ, (0, 1)).all():
        raise ConfigurationError("occupancies must be 0 or 1")


def empty_config(num_sites: int) -> np.ndarray:
    return np.zeros(num_sites, dtype=np.int64)


def full_config(num_sites: int) -> np.ndarray:
    return np.ones(num_sites, dtype=np.int64)


def coverage(occ: np.ndarray) -> float:
    """Fraction of occupied sites, in [0, 1]."""
    return float(np.sum(occ)) / occ.size


def coarsen(occ: np.ndarray, cs: CoarseSpec) -> np.ndarray:
    """Block spins eta(k) = sum of occupancies over cell C_k."""
    if occ.size != cs.n:
        raise ConfigurationError(f"configuration size {occ.size} != lattice size {cs.n}")
    return occ.reshape(cs.num_cells, cs.q).sum(axis=1)


def flip(occ: np.ndarray, x: int) -> np.ndarray:
    """Configuration with the occupancy at site x toggled; input left untouched."""
    if not 0 <= x < occ.size:
        raise ConfigurationError(f"site index {x} out of range [0, {occ.size})")
    out = occ.copy()
    out[x] = 1 - out[x]
    return out


def cell_of(x: int, cs: CoarseSpec) -> int:
    """Index of the coarse cell containing site x (contiguous blocks)."""
    if not 0 <= x < cs.n:
        raise ConfigurationError(f"site index {x} out of range [0, {cs.n})")
    return x // cs.q
