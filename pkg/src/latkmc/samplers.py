"""Trajectory samplers: SSA, n-fold (BKL), null-event, two-level, coarse-only.

All samplers generate the same continuous-time law for a given rate model;
they differ in per-step cost and in whether steps can be rejected:

* ``SSASampler``      rejection-free, O(N) search over the cumulative rates.
* ``BKLSampler``      rejection-free, groups sites into equal-rate classes.
* ``NullEventSampler`` uniformised: proposes a uniform site against the bound
  N * lambda_loc and recomputes the proposal's rate from scratch each time
  (deliberately; its per-proposal cost is part of the benchmark surface).
* ``TwoLevelSampler`` picks a coarse move (adsorb/desorb + cell) by a
  rejection-free search over the coarse rates, reconstructs a microscopic
  site inside the chosen cell, and accepts with probability proportional to
  the reconstruction rate.  Time advances by Exp(lambda_bar * lambda_rf)
  per proposal whether or not it is accepted.
* ``CGMCSampler``     null-event dynamics on the block-spin chain alone (no
  reconstruction); by default rejected proposals are aggregated analytically
  (geometric batch), which leaves the law unchanged.

Per-step random draws happen in a fixed, documented order so trajectories
are bit-reproducible from (seed, stream):
SSA: site, time | BKL: class, site, time | null-event: site, accept, time |
two-level: kind, cell, site, accept, time | CGMC: see class docstring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import AbsorbingStateError, ConfigurationError
from .lattice import RECOMPUTE_INTERVAL, CoarseSpec, coarsen
from .potentials import coarse_energy_diff
from .rates import (
    COARSE_GRAINED,
    CRUDE,
    EXACT_SUM,
    MICROSCOPIC,
    TWO_LEVEL_EXACT,
    TWO_LEVEL_SPLIT,
    RateModel,
    crude_rf_bound,
    exact_sum_rf_bound,
    micro_rates_all,
    safe_exp,
    safe_exp_array,
)

ADSORB = "adsorb"
DESORB = "desorb"
NULL = "null"

SAMPLER_KINDS = ("ssa", "bkl", "null-event", "mlkmc", "cgmc")

_BKL_CLASS_CAP = 1_000_000


@dataclass(frozen=True)
class RngState:
    """Seed plus per-replica stream id; same pair => identical event sequence."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))


class EventRecord(NamedTuple):
    step: int
    t: float
    site: int
    kind: str  # adsorb | desorb | null
    accepted: bool
    waiting_time: float


@dataclass(frozen=True)
class TrajectoryStats:
    n_steps: int
    n_flips: int
    n_null: int
    t_end: float
    final_coverage: float
    absorbed: bool


def sample_waiting_time(rate: float, rng: np.random.Generator) -> float:
    """Exponential holding time with mean 1/rate; u is drawn from (0, 1]."""
    if rate <= 0.0:
        raise AbsorbingStateError(f"no feasible events (total rate {rate})")
    u = 1.0 - rng.random()
    return -math.log(u) / rate


def _searchsorted_inclusive(cumulative: np.ndarray, target: float) -> int:
    """First index i with cumulative[i] >= target (ties resolve to the lower index)."""
    return int(np.searchsorted(cumulative, target, side="left"))


# ---------------------------------------------------------------------------
# Microscopic rejection-free samplers
# ---------------------------------------------------------------------------


class SSASampler:
    """Direct stochastic simulation: cumulative search over all site rates.

    After each flip the site rates are rebuilt with the vectorised evaluator
    (every site within interaction range changes, which for mean-field
    couplings is the whole ring) and the prefix sums are recomputed.
    """

    def __init__(self, model: RateModel, occ0: np.ndarray):
        if model.variant not in (MICROSCOPIC, TWO_LEVEL_EXACT, TWO_LEVEL_SPLIT):
            raise ConfigurationError(f"SSA needs site rates, got variant {model.variant!r}")
        self.model = model
        self.occ = occ0.astype(np.int64).copy()
        self.t = 0.0
        self.step_count = 0
        self._total = int(self.occ.sum())
        self._rates = self._all_rates()

    def _all_rates(self) -> np.ndarray:
        from .rates import combined_rates_all

        if self.model.variant == MICROSCOPIC:
            return micro_rates_all(self.occ, self.model)
        return combined_rates_all(self.occ, self.model)

    def coverage(self) -> float:
        return self._total / self.occ.size

    def step(self, rng: np.random.Generator) -> EventRecord:
        cum = np.cumsum(self._rates)
        lam = float(cum[-1])
        if lam <= 0.0:
            raise AbsorbingStateError("all rates vanish")
        x = _searchsorted_inclusive(cum, rng.random() * lam)
        kind = ADSORB if self.occ[x] == 0 else DESORB
        self._total += 1 if kind == ADSORB else -1
        self.occ[x] = 1 - self.occ[x]
        dt = sample_waiting_time(lam, rng)
        self.t += dt
        self.step_count += 1
        # Every site within interaction range of x changes rate; the vector
        # recompute covers exactly that set (the whole ring for mean-field J).
        self._rates = self._all_rates()
        return EventRecord(self.step_count, self.t, x, kind, True, dt)


class BKLSampler:
    """n-fold way: sites grouped into classes of equal rate.

    With long-range interactions the number of distinct rate values grows
    combinatorially, so long-range models are refused unless explicitly
    allowed; a hard class cap guards against degenerate blowup either way.
    """

    def __init__(self, model: RateModel, occ0: np.ndarray, allow_long_range: bool = False):
        if model.variant != MICROSCOPIC:
            raise ConfigurationError("BKL is implemented for microscopic rates")
        if model.P.J != 0.0 and not allow_long_range:
            raise ConfigurationError(
                "BKL with long-range interactions is infeasible (class count grows "
                "exponentially with the range); pass allow_long_range=True for small systems"
            )
        self.model = model
        self.occ = occ0.astype(np.int64).copy()
        self.t = 0.0
        self.step_count = 0

    def coverage(self) -> float:
        return float(self.occ.sum()) / self.occ.size

    def step(self, rng: np.random.Generator) -> EventRecord:
        rates = micro_rates_all(self.occ, self.model)
        values, inverse, counts = np.unique(rates, return_inverse=True, return_counts=True)
        if values.size > _BKL_CLASS_CAP:
            raise ConfigurationError(f"BKL class count {values.size} exceeds cap {_BKL_CLASS_CAP}")
        class_rates = values * counts
        cum = np.cumsum(class_rates)
        lam = float(cum[-1])
        if lam <= 0.0:
            raise AbsorbingStateError("all rates vanish")
        ci = _searchsorted_inclusive(cum, rng.random() * lam)
        members = np.flatnonzero(inverse == ci)
        x = int(members[int(rng.random() * members.size)])
        kind = ADSORB if self.occ[x] == 0 else DESORB
        self.occ[x] = 1 - self.occ[x]
        dt = sample_waiting_time(lam, rng)
        self.t += dt
        self.step_count += 1
        return EventRecord(self.step_count, self.t, x, kind, True, dt)


# ---------------------------------------------------------------------------
# Null-event sampler
# ---------------------------------------------------------------------------


class NullEventSampler:
    """Uniformised microscopic sampler.

    Each proposal picks a uniform site, computes that site's rate from the
    current configuration (an O(interaction range) summation; nothing is
    cached), and accepts iff c(x, sigma) >= lambda_loc * u.  Time advances by
    Exp(N * lambda_loc) per proposal.
    """

    def __init__(self, model: RateModel, occ0: np.ndarray):
        if model.variant != MICROSCOPIC:
            raise ConfigurationError("null-event sampler uses microscopic rates")
        self.model = model
        self.occ = occ0.astype(np.int64).copy()
        self.t = 0.0
        self.step_count = 0
        self._total = int(self.occ.sum())
        n = self.occ.size
        P = model.P
        self._clock = n * model.lambda_loc
        # Interaction window of a proposal: the per-proposal rate is computed
        # by an explicit gather-and-sum over these offsets (the O(range)
        # update cost of the algorithm; nothing is cached between proposals).
        if P.profile == "constant" and P.J != 0.0:
            if P.is_mean_field(n):
                self._window = np.arange(1, n)
                self._strength = P.J / n
            else:
                L = P.L
                self._window = np.concatenate([np.arange(-L, 0), np.arange(1, L + 1)])
                self._strength = P.J / (2.0 * L)
        else:
            self._window = None
            self._strength = 0.0

    def coverage(self) -> float:
        return self._total / self.occ.size

    def _site_rate(self, x: int) -> float:
        P = self.model.P
        occ = self.occ
        if occ[x] == 0:
            return P.d0
        n = occ.size
        u = 0.5 * P.K * (occ[(x - 1) % n] + occ[(x + 1) % n]) - P.h
        if P.J != 0.0:
            if self._window is not None:
                u += self._strength * occ.take(x + self._window, mode="wrap").sum()
            else:
                u = self.model.flip_energy(x, occ)
        return P.d0 * safe_exp(-P.beta * u)

    def step(self, rng: np.random.Generator) -> EventRecord:
        n = self.occ.size
        x = int(rng.random() * n)
        c = self._site_rate(x)
        u = rng.random()
        accepted = c >= self.model.lambda_loc * u
        if accepted:
            kind = ADSORB if self.occ[x] == 0 else DESORB
            self._total += 1 if self.occ[x] == 0 else -1
            self.occ[x] = 1 - self.occ[x]
        else:
            kind = NULL
        dt = sample_waiting_time(self._clock, rng)
        self.t += dt
        self.step_count += 1
        return EventRecord(self.step_count, self.t, x, kind, accepted, dt)


# ---------------------------------------------------------------------------
# Two-level sampler
# ---------------------------------------------------------------------------


class _CellSiteLists:
    """Per-cell occupied/vacant site pools with O(1) sampling and updates."""

    def __init__(self, occ: np.ndarray, cs: CoarseSpec):
        self.cs = cs
        self.occupied: list[list[int]] = [[] for _ in range(cs.num_cells)]
        self.vacant: list[list[int]] = [[] for _ in range(cs.num_cells)]
        self.pos = np.zeros(occ.size, dtype=np.int64)
        for x in range(occ.size):
            k = x // cs.q
            target = self.occupied[k] if occ[x] else self.vacant[k]
            self.pos[x] = len(target)
            target.append(x)

    def move(self, x: int, now_occupied: bool) -> None:
        k = x // self.cs.q
        src = self.vacant[k] if now_occupied else self.occupied[k]
        dst = self.occupied[k] if now_occupied else self.vacant[k]
        i = self.pos[x]
        last = src[-1]
        src[i] = last
        self.pos[last] = i
        src.pop()
        self.pos[x] = len(dst)
        dst.append(x)


class TwoLevelSampler:
    """Coarse move selection plus microscopic reconstruction.

    The reconstruction proposal is uniform over the feasible sites of the
    chosen cell (vacancies for adsorption, occupied sites for desorption) and
    is accepted iff lambda_rf * u <= n_feasible * c_rf(x), which realises the
    transition rate cbar * c_rf exactly for any valid bound lambda_rf.  With
    bound_mode='crude' lambda_rf is the O(1) worst-case bound
    max(1, exp(-beta * floor)); with 'exact-sum' it is the max over feasible
    coarse moves of the reconstruction-rate cell sums, recomputed each step.
    """

    def __init__(self, model: RateModel, occ0: np.ndarray, bound_mode: str = CRUDE):
        if model.variant not in (TWO_LEVEL_EXACT, TWO_LEVEL_SPLIT):
            raise ConfigurationError(f"two-level sampler needs a two-level variant, got {model.variant!r}")
        if bound_mode not in (CRUDE, EXACT_SUM):
            raise ConfigurationError(f"unknown bound mode {bound_mode!r}")
        self.model = model
        self.cs = model.cs
        self.bound_mode = bound_mode
        self.occ = occ0.astype(np.int64).copy()
        self.t = 0.0
        self.step_count = 0
        self._split = model.variant == TWO_LEVEL_SPLIT
        self._which = "long" if self._split else "full"
        self._crude_rf = crude_rf_bound(model)
        self._wbar_shift = model.coupling.jbar if self._split else model.coupling.wbar()
        self._beta = model.P.beta
        self._half_K = 0.5 * model.P.K
        self._half_h = 0.5 * model.P.h
        self._refresh()

    def _refresh(self) -> None:
        self.eta = coarsen(self.occ, self.cs)
        self.lists = _CellSiteLists(self.occ, self.cs)
        self._total = int(self.occ.sum())
        M = self.cs.num_cells
        self._ubar = np.array(
            [coarse_energy_diff(k, self.eta, self.model.coupling, which=self._which) for k in range(M)]
        )
        self._update_coarse_rates()

    def _update_coarse_rates(self) -> None:
        P, q = self.model.P, self.cs.q
        if self.cs.num_cells == 1:
            e = float(self.eta[0])
            self._lam_a = P.d0 * (q - e)
            self._lam_d = P.d0 * e * safe_exp(-P.beta * float(self._ubar[0]))
            return
        etaf = self.eta.astype(float)
        self._cbar_a = P.d0 * (q - etaf)
        self._cbar_d = P.d0 * etaf * safe_exp_array(-P.beta * self._ubar)
        self._lam_a = float(self._cbar_a.sum())
        self._lam_d = float(self._cbar_d.sum())

    def coverage(self) -> float:
        return self._total / self.occ.size

    def _lambda_rf(self) -> float:
        if self.bound_mode == CRUDE:
            return self._crude_rf
        return exact_sum_rf_bound(self.occ, self.eta, self.model)

    def _reconstruction_weight(self, x: int, kind: str, k: int) -> float:
        """n_feasible * c_rf(x | kind, k): 1 for adsorption, exp(-beta * E)
        for desorption with E the reconstruction energy."""
        if kind == ADSORB:
            return 1.0
        if self._split:
            n = self.occ.size
            left = self.occ[x - 1] if x else self.occ[n - 1]
            right = self.occ[x + 1] if x + 1 < n else self.occ[0]
            e = self._half_K * (left + right) - self._half_h
        else:
            e = self.model.flip_energy(x, self.occ) - self._ubar[k]
        return safe_exp(-self._beta * e)

    def step(self, rng: np.random.Generator) -> EventRecord:
        lam_a, lam_d = self._lam_a, self._lam_d
        lam_bar = lam_a + lam_d
        if lam_bar <= 0.0:
            raise AbsorbingStateError("coarse state is absorbing")
        kind = ADSORB if rng.random() < lam_a / lam_bar else DESORB
        u_cell = rng.random()
        if self.cs.num_cells == 1:
            k = 0
        else:
            rates = self._cbar_a if kind == ADSORB else self._cbar_d
            cum = np.cumsum(rates)
            k = _searchsorted_inclusive(cum, u_cell * float(cum[-1]))
        pool = self.lists.vacant[k] if kind == ADSORB else self.lists.occupied[k]
        x = pool[int(rng.random() * len(pool))]
        lam_rf = self._lambda_rf()
        accepted = lam_rf * rng.random() <= self._reconstruction_weight(x, kind, k)
        dt = sample_waiting_time(lam_bar * lam_rf, rng)
        self.t += dt
        self.step_count += 1
        if accepted:
            self._apply_flip(x, k, kind)
        if self.step_count % RECOMPUTE_INTERVAL == 0:
            self._refresh()
        return EventRecord(self.step_count, self.t, x, kind if accepted else NULL, accepted, dt)

    def _apply_flip(self, x: int, k: int, kind: str) -> None:
        s = 1 if kind == ADSORB else -1
        self.occ[x] += s
        self._total += s
        self.lists.move(x, now_occupied=(s == 1))
        self.eta[k] += s
        if self.cs.num_cells == 1:
            self._ubar[0] += s * self._wbar_shift[0]
        else:
            self._ubar += s * np.roll(self._wbar_shift, k)
        self._update_coarse_rates()


# ---------------------------------------------------------------------------
# Coarse-only null-event sampler
# ---------------------------------------------------------------------------


class CGMCSampler:
    """Null-event dynamics on the block-spin chain with both potentials
    coarse-grained (no reconstruction).

    In batch mode (default) the run of rejected proposals before the next
    accepted event is sampled in closed form: the number of consumed
    proposals is geometric with the per-proposal acceptance probability, the
    elapsed time is the corresponding Erlang sum of exponential waits, and
    the accepted move is drawn proportionally to the coarse rates.  This is
    law-identical to proposing cells one at a time and is recorded in the
    null counters.  Draw order per accepted event: geometric, move, time.
    Unbatched draw order per proposal: cell, accept, time.
    """

    def __init__(self, model: RateModel, eta0: np.ndarray, batch: bool = True):
        if model.variant != COARSE_GRAINED:
            raise ConfigurationError("CGMC sampler requires the coarse-grained variant")
        self.model = model
        self.cs = model.cs
        self.eta = eta0.astype(np.int64).copy()
        if (self.eta < 0).any() or (self.eta > self.cs.q).any():
            raise ConfigurationError("block spins must lie in [0, q]")
        self.batch = batch
        self.t = 0.0
        self.step_count = 0
        self.null_count = 0
        P, cs = model.P, model.cs
        wbar = model.coupling.wbar()
        ubar_floor = (
            cs.q * float(np.minimum(wbar[1:], 0.0).sum())
            + (cs.q - 1) * min(0.0, float(wbar[0]))
            - P.h
        )
        # Per-cell uniform bound on cbar_a + cbar_d.
        self._lambda_loc = P.d0 * cs.q * max(1.0, safe_exp(-P.beta * ubar_floor))
        self._clock = cs.num_cells * self._lambda_loc
        self._wbar_shift = wbar
        self._ubar = np.array(
            [coarse_energy_diff(k, self.eta, model.coupling, which="full") for k in range(cs.num_cells)]
        )
        self._total = int(self.eta.sum())
        self._next_refresh = RECOMPUTE_INTERVAL
        self._update_rates()

    def _refresh_caches(self) -> None:
        """Rebuild the additive caches from eta to bound float drift."""
        self._ubar = np.array(
            [coarse_energy_diff(k, self.eta, self.model.coupling, which="full")
             for k in range(self.cs.num_cells)]
        )
        self._total = int(self.eta.sum())
        self._update_rates()
        self._next_refresh = self.step_count + RECOMPUTE_INTERVAL

    def _update_rates(self) -> None:
        P, q = self.model.P, self.cs.q
        etaf = self.eta.astype(float)
        self._cbar_a = P.d0 * (q - etaf)
        self._cbar_d = P.d0 * etaf * safe_exp_array(-P.beta * self._ubar)

    def coverage(self) -> float:
        return self._total / self.cs.n

    def _apply(self, k: int, kind: str) -> None:
        s = 1 if kind == ADSORB else -1
        self.eta[k] += s
        self._total += s
        self._ubar += s * np.roll(self._wbar_shift, k)
        self._update_rates()
        if self.step_count >= self._next_refresh:
            self._refresh_caches()

    def step(self, rng: np.random.Generator) -> EventRecord:
        if self.batch:
            return self._step_batched(rng)
        return self._step_single(rng)

    def _step_single(self, rng: np.random.Generator) -> EventRecord:
        M = self.cs.num_cells
        k = int(rng.random() * M)
        u = rng.random()
        thr_a = self._cbar_a[k] / self._lambda_loc
        thr_d = thr_a + self._cbar_d[k] / self._lambda_loc
        dt = sample_waiting_time(self._clock, rng)
        self.t += dt
        self.step_count += 1
        if u < thr_a:
            self._apply(k, ADSORB)
            return EventRecord(self.step_count, self.t, k, ADSORB, True, dt)
        if u < thr_d:
            self._apply(k, DESORB)
            return EventRecord(self.step_count, self.t, k, DESORB, True, dt)
        # Null proposals emitted as records are counted by the driver, not here.
        return EventRecord(self.step_count, self.t, k, NULL, False, dt)

    def _step_batched(self, rng: np.random.Generator) -> EventRecord:
        total = float(self._cbar_a.sum() + self._cbar_d.sum())
        if total <= 0.0:
            raise AbsorbingStateError("coarse state is absorbing")
        p_acc = total / self._clock
        n_prop = int(rng.geometric(p_acc))
        cum = np.cumsum(np.concatenate([self._cbar_a, self._cbar_d]))
        j = _searchsorted_inclusive(cum, rng.random() * total)
        dt = float(rng.gamma(shape=n_prop, scale=1.0 / self._clock))
        self.t += dt
        self.step_count += n_prop
        self.null_count += n_prop - 1
        M = self.cs.num_cells
        kind = ADSORB if j < M else DESORB
        k = j % M
        self._apply(k, kind)
        return EventRecord(self.step_count, self.t, k, kind, True, dt)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


def make_sampler(kind: str, model: RateModel, initial: np.ndarray, **options):
    """Instantiate a sampler by name; `initial` is occupancies (block spins for cgmc)."""
    if kind == "ssa":
        return SSASampler(model, initial)
    if kind == "bkl":
        return BKLSampler(model, initial, allow_long_range=options.get("allow_long_range", False))
    if kind == "null-event":
        return NullEventSampler(model, initial)
    if kind == "mlkmc":
        return TwoLevelSampler(model, initial, bound_mode=options.get("bound_mode", CRUDE))
    if kind == "cgmc":
        return CGMCSampler(model, initial, batch=options.get("batch", True))
    raise ConfigurationError(f"unknown sampler kind {kind!r}; choose from {SAMPLER_KINDS}")


def drive(sampler, gen: np.random.Generator, until: float, observers: tuple = ()) -> TrajectoryStats:
    """Step an existing sampler until its simulated time reaches ``until``.

    Observers are callables observer(record, coverage_after) evaluated on
    every emitted event in order; an observer exposing a truthy ``done``
    attribute stops the run early.  An absorbing state flags the result as
    partial (absorbed=True) instead of raising.  Null proposals aggregated
    internally by a batching sampler are reflected in the counters but do not
    emit separate records.
    """
    absorbed = False
    n_flips = 0
    n_null = 0
    null0 = getattr(sampler, "null_count", 0)
    cov = sampler.coverage()
    cov_at_until = cov
    while sampler.t < until:
        cov_before = cov
        try:
            record = sampler.step(gen)
        except AbsorbingStateError:
            absorbed = True
            break
        if record.accepted:
            n_flips += 1
            cov = sampler.coverage()
        else:
            n_null += 1
        # The state holds until the event fires, so at time `until` the
        # trajectory is in the pre-event state whenever the event overshoots.
        cov_at_until = cov_before if record.t > until else cov
        if observers:
            stop = False
            for obs in observers:
                obs(record, cov)
                if getattr(obs, "done", False):
                    stop = True
            if stop:
                break
    n_null += getattr(sampler, "null_count", 0) - null0
    return TrajectoryStats(
        n_steps=sampler.step_count,
        n_flips=n_flips,
        n_null=n_null,
        t_end=sampler.t,
        final_coverage=cov_at_until,
        absorbed=absorbed,
    )


def run_trajectory(
    initial: np.ndarray,
    sampler_kind: str,
    model: RateModel,
    t_final: float,
    observers: tuple = (),
    rng: RngState | np.random.Generator = RngState(0),
    **options,
) -> TrajectoryStats:
    """Create a sampler and drive it until simulated time reaches t_final."""
    gen = rng.generator() if isinstance(rng, RngState) else rng
    sampler = make_sampler(sampler_kind, model, initial, **options)
    return drive(sampler, gen, t_final, observers)
