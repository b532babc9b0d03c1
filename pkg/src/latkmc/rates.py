"""Transition rates: microscopic Arrhenius, coarse-grained, reconstruction, combined.

Adsorption happens at the bare rate d0 on vacant sites; desorption at
d0 * exp(-beta * U(x, sigma)) on occupied sites.  The coarse-grained analogue
adsorbs into cell k at d0 * (q - eta(k)) and desorbs at
d0 * eta(k) * exp(-beta * Ubar(k, eta)).  A two-level model factorises the
microscopic rate into a coarse rate times a reconstruction rate,

    c_combined(x, sigma) = cbar_kind(k, eta) * c_rf_kind(x | k, eta),

exactly (variant 'exact', where the reconstruction corrects the full
coarsening error) or approximately (variant 'split', where only the
short-range energy is reconstructed).  The normalisation bounds defined here
drive the acceptance tests of the two-level sampler and the null-event
sampler; all bounds are conservative by construction (worst-case occupancy),
so the samplers stay unbiased for any parameter values.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .lattice import CoarseSpec, cell_of, coarsen
from .potentials import (
    CoarseCoupling,
    PotentialSpec,
    coarse_coupling,
    coarse_energy_diff,
    long_kernel_by_shift,
    pair_kernel_by_shift,
)

logger = logging.getLogger(__name__)

MICROSCOPIC = "microscopic"
COARSE_GRAINED = "coarse-grained"
TWO_LEVEL_EXACT = "two-level-exact"
TWO_LEVEL_SPLIT = "two-level-split"

VARIANTS = (MICROSCOPIC, COARSE_GRAINED, TWO_LEVEL_EXACT, TWO_LEVEL_SPLIT)

# exp(-x) underflows to subnormal/zero below roughly x = 708; clamp explicitly.
_EXP_CLAMP = 700.0
_underflow_warned = False


def safe_exp(arg: float) -> float:
    """exp(arg) with arguments below -700 clamped to exactly 0 (logged once)."""
    global _underflow_warned
    if arg < -_EXP_CLAMP:
        if not _underflow_warned:
            logger.warning("rate underflow: exp(%g) clamped to 0", arg)
            _underflow_warned = True
        return 0.0
    return math.exp(arg)


def safe_exp_array(arg: np.ndarray) -> np.ndarray:
    global _underflow_warned
    small = arg < -_EXP_CLAMP
    if small.any():
        if not _underflow_warned:
            logger.warning("rate underflow: exp(%g) clamped to 0", float(arg[small].min()))
            _underflow_warned = True
        arg = np.where(small, -np.inf, arg)
    return np.exp(arg)


class Variant:
    """Namespace of rate-model variant names."""

    MICROSCOPIC = MICROSCOPIC
    COARSE_GRAINED = COARSE_GRAINED
    TWO_LEVEL_EXACT = TWO_LEVEL_EXACT
    TWO_LEVEL_SPLIT = TWO_LEVEL_SPLIT


class RateModel:
    """Immutable bundle of potential, coarsening and precomputed kernels.

    All arrays computed in __init__ are treated as read-only; samplers keep
    their own mutable caches.
    """

    def __init__(self, variant: str, P: PotentialSpec, n: int, cs: CoarseSpec | None = None):
        if variant not in VARIANTS:
            raise ConfigurationError(f"unknown rate-model variant {variant!r}")
        if variant != MICROSCOPIC and cs is None:
            raise ConfigurationError(f"variant {variant!r} requires a CoarseSpec")
        if cs is not None and cs.n != n:
            raise ConfigurationError(f"CoarseSpec lattice size {cs.n} != n={n}")
        self.variant = variant
        self.P = P
        self.n = n
        self.cs = cs
        self.coupling: CoarseCoupling | None = coarse_coupling(P, cs) if cs is not None else None

        self.w_shift = pair_kernel_by_shift(P, n)
        self.j_shift = long_kernel_by_shift(P, n)
        self._nonzero_j_shifts = np.nonzero(self.j_shift)[0]

        # Analytic floor of the microscopic flip energy U(x, sigma) over all
        # states: sum of the most negative attainable pair contributions.
        self.u_min_micro = float(np.minimum(self.w_shift, 0.0).sum()) - P.h
        # Floor of the short-range part U_s (two neighbours at K/2 each).
        self.u_s_floor = min(0.0, P.K) - 0.5 * P.h
        self.u_exact_floor = self._exact_reconstruction_floor() if cs is not None else 0.0

        # Uniform per-site bound for the null-event sampler.
        self.lambda_loc = P.d0 * max(1.0, safe_exp(-P.beta * self.u_min_micro))

    # -- energies ----------------------------------------------------------

    def flip_energy(self, x: int, occ: np.ndarray) -> float:
        """U(x, sigma), exact O(N) evaluation."""
        n = self.n
        u = 0.5 * self.P.K * (occ[(x - 1) % n] + occ[(x + 1) % n]) - self.P.h
        if self.P.J != 0.0:
            u += float(self.j_shift[1:] @ np.roll(occ, -x)[1:].astype(float))
        return float(u)

    def flip_energies(self, occ: np.ndarray) -> np.ndarray:
        """U(x, sigma) for every site, vectorised and exactly consistent with
        flip_energy (same summation structure)."""
        n = self.n
        occf = occ.astype(float)
        u = 0.5 * self.P.K * (np.roll(occf, 1) + np.roll(occf, -1)) - self.P.h
        if self.P.J != 0.0:
            if self.P.is_mean_field(n) and self.P.profile == "constant":
                u += (self.P.J / n) * (occf.sum() - occf)
            elif self.P.profile == "constant":
                L = self.P.L
                padded = np.concatenate([occf, occf, occf])
                c = np.cumsum(padded)
                x = np.arange(n) + n
                window = c[x + L] - c[x - L - 1] - occf
                u += (self.P.J / (2.0 * L)) * window
            else:
                j = self.j_shift
                for r in self._nonzero_j_shifts:
                    u += j[r] * np.roll(occf, -r)
        return u

    def short_energies(self, occ: np.ndarray) -> np.ndarray:
        """U_s(x, sigma) for every site (nearest neighbours, half field)."""
        occf = occ.astype(float)
        return 0.5 * self.P.K * (np.roll(occf, 1) + np.roll(occf, -1)) - 0.5 * self.P.h

    def _exact_reconstruction_floor(self) -> float:
        """Analytic lower bound on U(x, sigma) - Ubar(k, eta) over all states.

        Decomposing the difference into per-site contributions
        (W(x-y) - Wbar(cell(x), cell(y))) * sigma(y) and keeping only negative
        terms gives a state-independent floor that is exact (zero) at q = 1.
        """
        cs = self.cs
        wbar = self.coupling.wbar()
        n, q, M = cs.n, cs.q, cs.num_cells
        y = np.arange(n)
        floors = []
        for o in range(q):
            shifts = (y - o) % n
            cdist = ((y // q) - 0) % M
            diff = self.w_shift[shifts] - wbar[cdist]
            diff[o] = 0.0  # y = x never contributes
            floors.append(np.minimum(diff, 0.0).sum())
        return float(min(floors))

    def reconstruction_floor(self, variant: str | None = None) -> float:
        v = variant or self.variant
        if v == TWO_LEVEL_SPLIT:
            return self.u_s_floor
        if v == TWO_LEVEL_EXACT:
            return self.u_exact_floor
        raise ConfigurationError(f"no reconstruction floor for variant {v!r}")


# ---------------------------------------------------------------------------
# Microscopic rates
# ---------------------------------------------------------------------------


def micro_rate(x: int, occ: np.ndarray, model: RateModel) -> float:
    """Arrhenius rate of flipping site x: d0 for adsorption, d0*exp(-beta*U)
    for desorption."""
    if occ[x] == 0:
        return model.P.d0
    return model.P.d0 * safe_exp(-model.P.beta * model.flip_energy(x, occ))


def micro_rates_all(occ: np.ndarray, model: RateModel) -> np.ndarray:
    P = model.P
    u = model.flip_energies(occ)
    return np.where(occ == 0, P.d0, P.d0 * safe_exp_array(-P.beta * u))


# ---------------------------------------------------------------------------
# Coarse rates
# ---------------------------------------------------------------------------


def coarse_rates(k: int, eta: np.ndarray, model: RateModel, which: str = "full") -> tuple[float, float]:
    """(adsorption, desorption) rate of cell k; zero at full/empty cells."""
    P, cs = model.P, model.cs
    adsorb = P.d0 * (cs.q - float(eta[k]))
    if eta[k] == 0:
        return adsorb, 0.0
    ubar = coarse_energy_diff(k, eta, model.coupling, which=which)
    return adsorb, P.d0 * float(eta[k]) * safe_exp(-P.beta * ubar)


def coarse_rates_all(eta: np.ndarray, model: RateModel, which: str = "full") -> tuple[np.ndarray, np.ndarray]:
    P, cs = model.P, model.cs
    M = cs.num_cells
    adsorb = P.d0 * (cs.q - eta.astype(float))
    ubar = np.array([coarse_energy_diff(k, eta, model.coupling, which=which) for k in range(M)])
    desorb = P.d0 * eta.astype(float) * safe_exp_array(-P.beta * ubar)
    return adsorb, desorb


def _which_for(variant: str) -> str:
    return "long" if variant == TWO_LEVEL_SPLIT else "full"


# ---------------------------------------------------------------------------
# Reconstruction and combined rates
# ---------------------------------------------------------------------------


def reconstruction_rate(
    x: int,
    kind: str,
    occ: np.ndarray,
    eta: np.ndarray,
    model: RateModel,
    variant: str | None = None,
) -> float:
    """Conditional rate of picking site x given the coarse move (kind, cell)."""
    v = variant or model.variant
    cs = model.cs
    k = cell_of(x, cs)
    if kind == "adsorb":
        if eta[k] >= cs.q:
            raise ConfigurationError("adsorption proposed into a full cell")
        return (1.0 - float(occ[x])) / (cs.q - float(eta[k]))
    if kind != "desorb":
        raise ConfigurationError(f"kind must be 'adsorb' or 'desorb', got {kind!r}")
    if eta[k] <= 0:
        raise ConfigurationError("desorption proposed from an empty cell")
    if occ[x] == 0:
        return 0.0
    beta = model.P.beta
    if v == TWO_LEVEL_SPLIT:
        u_s = 0.5 * model.P.K * (occ[(x - 1) % model.n] + occ[(x + 1) % model.n]) - 0.5 * model.P.h
        return safe_exp(-beta * u_s) / float(eta[k])
    if v == TWO_LEVEL_EXACT:
        u = model.flip_energy(x, occ)
        ubar = coarse_energy_diff(k, eta, model.coupling, which="full")
        return safe_exp(-beta * (u - ubar)) / float(eta[k])
    raise ConfigurationError(f"no reconstruction rates for variant {v!r}")


def combined_rate(x: int, occ: np.ndarray, model: RateModel, eta: np.ndarray | None = None) -> float:
    """Two-level rate cbar * c_rf of flipping site x (product form)."""
    if model.variant == MICROSCOPIC:
        return micro_rate(x, occ, model)
    if eta is None:
        eta = coarsen(occ, model.cs)
    k = cell_of(x, model.cs)
    which = _which_for(model.variant)
    kind = "adsorb" if occ[x] == 0 else "desorb"
    c_a, c_d = coarse_rates(k, eta, model, which=which)
    cbar = c_a if kind == "adsorb" else c_d
    if cbar == 0.0:
        return 0.0
    return cbar * reconstruction_rate(x, kind, occ, eta, model)


def combined_rates_all(occ: np.ndarray, model: RateModel, eta: np.ndarray | None = None) -> np.ndarray:
    """Vectorised combined rates for every site (closed form of the product)."""
    P = model.P
    if model.variant == MICROSCOPIC:
        return micro_rates_all(occ, model)
    if eta is None:
        eta = coarsen(occ, model.cs)
    if model.variant == TWO_LEVEL_EXACT:
        return micro_rates_all(occ, model)  # identity of the exact factorisation
    if model.variant != TWO_LEVEL_SPLIT:
        raise ConfigurationError(f"no site rates for variant {model.variant!r}")
    which = _which_for(model.variant)
    ubar = np.array(
        [coarse_energy_diff(k, eta, model.coupling, which=which) for k in range(model.cs.num_cells)]
    )
    u_tilde = model.short_energies(occ) + np.repeat(ubar, model.cs.q)
    return np.where(occ == 0, P.d0, P.d0 * safe_exp_array(-P.beta * u_tilde))


# ---------------------------------------------------------------------------
# Normalisation bounds and rejection probabilities
# ---------------------------------------------------------------------------

CRUDE = "crude"
EXACT_SUM = "exact-sum"
BOUND_MODES = (CRUDE, EXACT_SUM)


@dataclass(frozen=True)
class RateBounds:
    """Normalisations of the two-level sampler at one state."""

    lambda_bar: float  # total coarse rate
    lambda_rf: float  # reconstruction normalisation (per selected bound mode)
    lambda_tilde_star: float  # lambda_bar * lambda_rf, the step clock
    lambda_loc: float  # per-site uniform bound of the null-event sampler
    bound_mode: str


def crude_rf_bound(model: RateModel, variant: str | None = None) -> float:
    """O(1) reconstruction bound: proposals go to feasible sites only, so the
    cell sums are bounded by max(1, exp(-beta * floor))."""
    floor = model.reconstruction_floor(variant)
    return max(1.0, safe_exp(-model.P.beta * floor))


def uniform_proposal_bound(eta: np.ndarray, model: RateModel, variant: str | None = None) -> float:
    """The published closed-form bound q*max{1/(q - eta_k), exp(-beta*floor)/eta_k}.

    This is the normalisation appropriate when the reconstruction step
    proposes uniformly over all q sites of a cell; it exceeds crude_rf_bound
    by the feasible-site fraction.  Exposed for diagnostics and tests; the
    sampler itself proposes among feasible sites.
    """
    q = model.cs.q
    floor = model.reconstruction_floor(variant)
    boltz = safe_exp(-model.P.beta * floor)
    best = 0.0
    for ek in np.unique(eta):
        ek = float(ek)
        if ek < q:
            best = max(best, q / (q - ek))
        if ek > 0:
            best = max(best, (q / ek) * boltz)
    return best


def exact_sum_rf_bound(occ: np.ndarray, eta: np.ndarray, model: RateModel) -> float:
    """max over feasible (kind, cell) of the reconstruction-rate cell sums."""
    cs = model.cs
    bound = 1.0 if (eta < cs.q).any() else 0.0
    if (eta > 0).any():
        if model.variant == TWO_LEVEL_SPLIT:
            e = model.short_energies(occ)
        else:
            ubar = np.array(
                [coarse_energy_diff(k, eta, model.coupling, which="full") for k in range(cs.num_cells)]
            )
            e = model.flip_energies(occ) - np.repeat(ubar, cs.q)
        weights = np.where(occ > 0, safe_exp_array(-model.P.beta * e), 0.0)
        cell_sums = weights.reshape(cs.num_cells, cs.q).sum(axis=1)
        mask = eta > 0
        bound = max(bound, float((cell_sums[mask] / eta[mask]).max()))
    return bound


def rate_bounds(occ: np.ndarray, model: RateModel, bound_mode: str = CRUDE) -> RateBounds:
    if bound_mode not in BOUND_MODES:
        raise ConfigurationError(f"unknown bound mode {bound_mode!r}")
    eta = coarsen(occ, model.cs)
    which = _which_for(model.variant)
    c_a, c_d = coarse_rates_all(eta, model, which=which)
    lambda_bar = float(c_a.sum() + c_d.sum())
    if bound_mode == CRUDE:
        lam_rf = crude_rf_bound(model)
    else:
        lam_rf = exact_sum_rf_bound(occ, eta, model)
    return RateBounds(
        lambda_bar=lambda_bar,
        lambda_rf=lam_rf,
        lambda_tilde_star=lambda_bar * lam_rf,
        lambda_loc=model.lambda_loc,
        bound_mode=bound_mode,
    )


def total_combined_rate(occ: np.ndarray, model: RateModel) -> float:
    return float(combined_rates_all(occ, model).sum())


def total_micro_rate(occ: np.ndarray, model: RateModel) -> float:
    return float(micro_rates_all(occ, model).sum())


def rejection_probabilities(occ: np.ndarray, model: RateModel, bound_mode: str = CRUDE) -> tuple[float, float]:
    """(p_rej_multi, p_rej_null) at the given state.

    p_rej_multi = 1 - lambda_tilde / lambda_tilde_star for the two-level
    sampler (NaN for models without a coarse level); p_rej_null =
    1 - lambda / (N * lambda_loc) for the null-event sampler.  Values lie
    in [0, 1].
    """
    if model.cs is None:
        p_multi = math.nan
    else:
        bounds = rate_bounds(occ, model, bound_mode=bound_mode)
        lam_tilde = total_combined_rate(occ, model)
        p_multi = 0.0
        if bounds.lambda_tilde_star > 0:
            p_multi = max(0.0, 1.0 - lam_tilde / bounds.lambda_tilde_star)
    lam = total_micro_rate(occ, model)
    p_null = max(0.0, 1.0 - lam / (occ.size * model.lambda_loc))
    return p_multi, p_null
