"""Exact small-system references: Gibbs enumeration, generators, master equation.

Configurations are enumerated in canonical binary order with site 0 as the
least significant bit, so configuration index i has occupancy
occ(x) = (i >> x) & 1.  Everything here is brute force by design; sizes are
guarded so the whole oracle suite stays interactive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, OracleSizeError
from .lattice import CoarseSpec, coarsen
from .potentials import PotentialSpec, coarse_coupling, pair_kernel_by_shift, short_kernel_by_shift
from .rates import (
    MICROSCOPIC,
    TWO_LEVEL_SPLIT,
    RateModel,
    combined_rates_all,
    micro_rates_all,
)

MAX_ENUM_SITES = 20
MAX_GENERATOR_SITES = 14
MAX_BALANCE_SITES = 12


def all_configs(n: int) -> np.ndarray:
    """(2^n, n) occupancy matrix in canonical binary order (site 0 = LSB)."""
    idx = np.arange(1 << n, dtype=np.uint32)
    return ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int64)


def config_index(occ: np.ndarray) -> int:
    return int((occ.astype(np.int64) << np.arange(occ.size)).sum())


def _pair_weight_matrix(P: PotentialSpec, n: int, hamiltonian: str, cs: CoarseSpec | None) -> np.ndarray:
    """Site-pair weight matrix W[x, y] entering H = -1/2 sum W sigma sigma + h sum sigma."""
    shifts = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    if hamiltonian == "exact":
        W = pair_kernel_by_shift(P, n)[shifts]
    elif hamiltonian == "split":
        if cs is None:
            raise ConfigurationError("split Hamiltonian requires a CoarseSpec")
        C = coarse_coupling(P, cs)
        cells = np.arange(n) // cs.q
        cdist = (cells[None, :] - cells[:, None]) % cs.num_cells
        W = short_kernel_by_shift(P, n)[shifts] + C.jbar[cdist]
    else:
        raise ConfigurationError(f"hamiltonian must be 'exact' or 'split', got {hamiltonian!r}")
    np.fill_diagonal(W, 0.0)
    return W


def energies_all(P: PotentialSpec, n: int, hamiltonian: str = "exact", cs: CoarseSpec | None = None) -> np.ndarray:
    """Energy of every configuration under the exact or the split Hamiltonian."""
    if n > MAX_ENUM_SITES:
        raise OracleSizeError(f"enumeration limited to N <= {MAX_ENUM_SITES}, got {n}")
    W = _pair_weight_matrix(P, n, hamiltonian, cs)
    S = all_configs(n).astype(float)
    pair = -0.5 * np.einsum("ix,ix->i", S @ W, S)
    return pair + P.h * S.sum(axis=1)


@dataclass(frozen=True)
class EnumeratedMeasure:
    """Normalised Boltzmann measure over all 2^N configurations."""

    n: int
    log_weights: np.ndarray  # -beta * H, unnormalised
    probabilities: np.ndarray
    log_partition: float  # log sum_sigma exp(-beta H); N*log 2 at beta = 0


def enumerate_gibbs(
    P: PotentialSpec,
    n: int,
    hamiltonian: str = "exact",
    cs: CoarseSpec | None = None,
) -> EnumeratedMeasure:
    """Exact Gibbs measure by full enumeration with log-sum-exp stabilisation."""
    E = energies_all(P, n, hamiltonian=hamiltonian, cs=cs)
    logw = -P.beta * E
    m = logw.max()
    z = np.exp(logw - m).sum()
    probs = np.exp(logw - m) / z
    return EnumeratedMeasure(n=n, log_weights=logw, probabilities=probs, log_partition=float(m + np.log(z)))


def relative_entropy_per_particle(mu: EnumeratedMeasure, nu: EnumeratedMeasure) -> float:
    """R(mu | nu) = (1/N) sum mu log(mu/nu); nonnegative, 0 iff equal."""
    if mu.n != nu.n:
        raise ConfigurationError("measures live on different lattices")
    logp = mu.log_weights - mu.log_partition
    logq = nu.log_weights - nu.log_partition
    if np.any((mu.probabilities > 0) & ~np.isfinite(logq)):
        raise ConfigurationError("support mismatch: nu vanishes where mu is positive")
    return float(np.sum(mu.probabilities * (logp - logq))) / mu.n


def _site_rate_matrix(model: RateModel, n: int) -> np.ndarray:
    """R[i, x] = rate of flipping site x in configuration i (combined rates for
    two-level variants, microscopic otherwise)."""
    configs = all_configs(n)
    R = np.empty((configs.shape[0], n))
    for i, occ in enumerate(configs):
        if model.variant == MICROSCOPIC:
            R[i] = micro_rates_all(occ, model)
        else:
            R[i] = combined_rates_all(occ, model)
    return R


def detailed_balance_check(model: RateModel, hamiltonian: str = "exact") -> float:
    """Max violation of c(x,sigma) w(sigma) = c(x,sigma^x) w(sigma^x), scaled by max w.

    Exact rates are checked against the exact Hamiltonian, split-variant rates
    against the split Hamiltonian.
    """
    n = model.n
    if n > MAX_BALANCE_SITES:
        raise OracleSizeError(f"balance check limited to N <= {MAX_BALANCE_SITES}, got {n}")
    E = energies_all(model.P, n, hamiltonian=hamiltonian, cs=model.cs)
    logw = -model.P.beta * E
    w = np.exp(logw - logw.max())  # max weight scaled to 1
    R = _site_rate_matrix(model, n)
    idx = np.arange(1 << n)
    worst = 0.0
    for x in range(n):
        flipped = idx ^ (1 << x)
        worst = max(worst, float(np.abs(R[:, x] * w - R[flipped, x] * w[flipped]).max()))
    return worst


def build_generator(model: RateModel, n: int) -> sp.csr_matrix:
    """Sparse generator Q with Q[sigma, sigma^x] = c(x, sigma) and zero row sums."""
    if n > MAX_GENERATOR_SITES:
        raise OracleSizeError(f"generator limited to N <= {MAX_GENERATOR_SITES}, got {n}")
    R = _site_rate_matrix(model, n)
    size = 1 << n
    idx = np.arange(size)
    rows = np.repeat(idx, n)
    cols = (idx[:, None] ^ (1 << np.arange(n))[None, :]).ravel()
    data = R.ravel()
    Q = sp.csr_matrix((data, (rows, cols)), shape=(size, size))
    Q = Q - sp.diags(np.asarray(Q.sum(axis=1)).ravel())
    return Q.tocsr()


def master_equation_evolve(Q: sp.spmatrix, p0: np.ndarray, t: float, tol: float = 1e-12) -> np.ndarray:
    """p(t) = p0 exp(t Q) by the uniformisation series.

    Writes Q = lam (P - I) with lam the largest exit rate and sums the Poisson
    mixture sum_k e^{-lam t} (lam t)^k / k! * p0 P^k, stepping in time so the
    Poisson weights stay representable.  The result is checked for drift and
    renormalised.
    """
    p = np.asarray(p0, dtype=float)
    if abs(p.sum() - 1.0) > 1e-9:
        raise ConfigurationError("p0 must be a probability vector")
    if t < 0:
        raise ConfigurationError("t must be nonnegative")
    if t == 0:
        return p.copy()
    lam = float(-Q.diagonal().min())
    if lam == 0.0:
        return p.copy()
    P = (Q / lam + sp.identity(Q.shape[0], format="csr")).tocsr()
    max_chunk = 200.0
    n_chunks = max(1, int(np.ceil(lam * t / max_chunk)))
    dt = t / n_chunks
    for _ in range(n_chunks):
        a = lam * dt
        weight = np.exp(-a)
        term = p.copy()
        acc = weight * term
        k = 0
        remaining = 1.0 - weight
        while remaining > tol:
            k += 1
            term = term @ P
            weight *= a / k
            acc += weight * term
            remaining -= weight
            if k > 10 * a + 200:
                raise RuntimeError(f"uniformisation series failed to converge (lam*dt={a:g}, k={k})")
        p = acc
    drift = abs(p.sum() - 1.0)
    if drift > 1e-9:
        raise RuntimeError(f"master-equation probability drift {drift:g} exceeds 1e-9")
    return p / p.sum()


def expected_coverage(p: np.ndarray, n: int) -> float:
    """E[coverage] under a distribution over configuration indices."""
    counts = np.array([bin(i).count("1") for i in range(1 << n)], dtype=float)
    return float(p @ counts) / n


def stationarity_violation(model: RateModel, measure: EnumeratedMeasure) -> float:
    """Max |mu Q| entry; zero for the invariant measure."""
    Q = build_generator(model, model.n)
    return float(np.abs(measure.probabilities @ Q).max())


def weak_error_scan(
    P: PotentialSpec,
    n: int,
    q_values: list[int],
    T: float,
    initial_index: int = 0,
) -> list[tuple[int, float]]:
    """|E[coverage(T)] difference| between the exact process and the
    potential-splitting process, per coarsening level q, both computed from
    the master equation started at the given configuration."""
    if n > MAX_GENERATOR_SITES - 2:
        raise OracleSizeError(f"weak-error scan limited to N <= {MAX_GENERATOR_SITES - 2}, got {n}")
    p0 = np.zeros(1 << n)
    p0[initial_index] = 1.0
    micro = RateModel(MICROSCOPIC, P, n)
    p_exact = master_equation_evolve(build_generator(micro, n), p0, T)
    ref = expected_coverage(p_exact, n)
    out = []
    for q in q_values:
        cs = CoarseSpec(n=n, q=q)
        split = RateModel(TWO_LEVEL_SPLIT, P, n, cs=cs)
        p_split = master_equation_evolve(build_generator(split, n), p0, T)
        out.append((q, abs(expected_coverage(p_split, n) - ref)))
    return out
