"""Online observables over event streams, ensembles, and derived estimators.

Observers are callables ``obs(record, coverage_after)`` fed every event in
order by the trajectory driver; they accumulate into plain mergeable sums so
replica results combine associatively.  Error bars are plain standard errors
(no autocorrelation correction; time averages use block means instead).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError
from .lattice import CoarseSpec, coarsen
from .potentials import PotentialSpec
from .rates import (
    MICROSCOPIC,
    RateModel,
    combined_rates_all,
    micro_rates_all,
)
from .samplers import NULL, EventRecord, RngState, TrajectoryStats, drive, make_sampler


def coverage(occ: np.ndarray) -> float:
    """Occupied fraction (1/N) sum sigma(x)."""
    return float(np.sum(occ)) / occ.size


def correlation(occ: np.ndarray, k: int) -> float:
    """Spatial correlation (1/N) sum_x sigma(x) sigma(x+k); equals coverage at k=0."""
    if not 0 <= k < occ.size:
        raise ConfigurationError(f"lag {k} out of range [0, {occ.size})")
    return float(np.sum(occ * np.roll(occ, -k))) / occ.size


@dataclass
class MeanAccumulator:
    """Count/sum/sum-of-squares accumulator; merging is order-independent."""

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def add(self, value: float) -> None:
        self.count += 1
        self.total += value
        self.total_sq += value * value

    def merge(self, other: "MeanAccumulator") -> "MeanAccumulator":
        return MeanAccumulator(
            self.count + other.count, self.total + other.total, self.total_sq + other.total_sq
        )

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else math.nan

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.nan
        var = (self.total_sq - self.total**2 / self.count) / (self.count - 1)
        return math.sqrt(max(var, 0.0) / self.count)

    def ci95(self) -> tuple[float, float]:
        half = 1.96 * self.stderr
        return self.mean - half, self.mean + half


# ---------------------------------------------------------------------------
# Stream observers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExitTimeSample:
    tau: float
    censored: bool


class ExitTimeObserver:
    """First time the post-event coverage reaches the threshold."""

    def __init__(self, threshold: float, initial_coverage: float = 0.0):
        if not 0.0 < threshold <= 1.0:
            raise ConfigurationError(f"threshold must be in (0, 1], got {threshold}")
        self.threshold = threshold
        self.tau: float | None = 0.0 if initial_coverage >= threshold else None
        self.done = self.tau is not None

    def __call__(self, record: EventRecord, cov: float) -> None:
        if not self.done and cov >= self.threshold:
            self.tau = record.t
            self.done = True

    def result(self, t_final: float) -> ExitTimeSample:
        if self.tau is None or self.tau > t_final:
            return ExitTimeSample(tau=t_final, censored=True)
        return ExitTimeSample(tau=self.tau, censored=False)


class GridCoverageObserver:
    """Coverage sampled onto a uniform time grid (piecewise-constant hold)."""

    def __init__(self, t_final: float, n_points: int, initial_coverage: float):
        self.grid = np.linspace(0.0, t_final, n_points)
        self.values = np.full(n_points, np.nan)
        self._filled = 0
        self._last_cov = initial_coverage
        self.done = False

    def __call__(self, record: EventRecord, cov: float) -> None:
        while self._filled < self.grid.size and self.grid[self._filled] < record.t:
            self.values[self._filled] = self._last_cov
            self._filled += 1
        self._last_cov = cov

    def finalize(self) -> np.ndarray:
        self.values[self._filled :] = self._last_cov
        self._filled = self.grid.size
        return self.values


class TimeAverageObserver:
    """Time-averaged coverage over [t_start, inf), with block means for error bars."""

    def __init__(self, t_start: float, initial_coverage: float, n_blocks: int = 10, t_end: float = math.inf):
        self.t_start = t_start
        self.t_end = t_end
        self._last_t = 0.0
        self._last_cov = initial_coverage
        self._weighted = 0.0
        self._elapsed = 0.0
        self._blocks: list[tuple[float, float]] = []  # (weighted coverage, duration)
        self._block_target = (t_end - t_start) / n_blocks if math.isfinite(t_end) else math.inf
        self._cur_w = 0.0
        self._cur_dt = 0.0
        self.done = False

    def __call__(self, record: EventRecord, cov: float) -> None:
        lo = max(self._last_t, self.t_start)
        hi = min(record.t, self.t_end)
        if hi > lo:
            dt = hi - lo
            self._weighted += self._last_cov * dt
            self._elapsed += dt
            self._cur_w += self._last_cov * dt
            self._cur_dt += dt
            if self._cur_dt >= self._block_target:
                self._blocks.append((self._cur_w, self._cur_dt))
                self._cur_w = 0.0
                self._cur_dt = 0.0
        self._last_t = record.t
        self._last_cov = cov

    @property
    def mean(self) -> float:
        return self._weighted / self._elapsed if self._elapsed > 0 else math.nan

    @property
    def stderr(self) -> float:
        if self._cur_dt > 0:
            blocks = self._blocks + [(self._cur_w, self._cur_dt)]
        else:
            blocks = self._blocks
        means = [w / dt for w, dt in blocks if dt > 0]
        if len(means) < 2:
            return math.nan
        return float(np.std(means, ddof=1) / math.sqrt(len(means)))


class EventLogObserver:
    """Collects every event record (small runs only)."""

    def __init__(self):
        self.records: list[EventRecord] = []
        self.done = False

    def __call__(self, record: EventRecord, cov: float) -> None:
        self.records.append(record)


def empirical_rejection_rate(source) -> float:
    """Fraction of null events in an event stream or a TrajectoryStats."""
    if isinstance(source, TrajectoryStats):
        if source.n_steps == 0:
            raise ConfigurationError("empty event stream")
        return source.n_null / source.n_steps
    records = list(source)
    if not records:
        raise ConfigurationError("empty event stream")
    return sum(1 for r in records if r.kind == NULL) / len(records)


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------


def _run_indexed(worker, n_replicas: int, threads: int) -> list:
    if threads <= 1:
        return [worker(i) for i in range(n_replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(n_replicas)))


def exit_time_ensemble(
    model: RateModel,
    sampler_kind: str,
    initial: np.ndarray,
    threshold: float,
    t_final: float,
    n_replicas: int,
    seed: int,
    threads: int = 1,
    return_stats: bool = False,
    **options,
) -> list[ExitTimeSample] | tuple[list[ExitTimeSample], dict]:
    """Independent exit-time replicas; replica i uses stream id i.

    With return_stats=True also returns aggregate event counters
    (total proposals, flips, null fraction) across the ensemble.
    """

    def worker(i: int):
        gen = RngState(seed, i).generator()
        sampler = make_sampler(sampler_kind, model, initial, **options)
        obs = ExitTimeObserver(threshold, initial_coverage=sampler.coverage())
        stats = drive(sampler, gen, t_final, observers=(obs,))
        return obs.result(t_final), stats

    results = _run_indexed(worker, n_replicas, threads)
    samples = [r[0] for r in results]
    if not return_stats:
        return samples
    n_steps = sum(r[1].n_steps for r in results)
    n_null = sum(r[1].n_null for r in results)
    totals = {
        "events": n_steps,
        "flips": sum(r[1].n_flips for r in results),
        "null_fraction": n_null / max(1, n_steps),
    }
    return samples, totals


def summarize_exit_times(samples: list[ExitTimeSample]) -> dict:
    """Mean over uncensored samples with 95% CI; censored counted separately."""
    acc = MeanAccumulator()
    censored = 0
    for s in samples:
        if s.censored:
            censored += 1
        else:
            acc.add(s.tau)
    lo, hi = acc.ci95() if acc.count >= 2 else (math.nan, math.nan)
    return {
        "n_replicas": len(samples),
        "n_censored": censored,
        "mean": acc.mean,
        "stderr": acc.stderr,
        "ci95": [lo, hi],
    }


# ---------------------------------------------------------------------------
# Hysteresis sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HysteresisPoint:
    h: float
    mean_coverage: float
    stderr: float
    direction: str  # "up" | "down"
    absorbed: bool = False


def hysteresis_sweep(
    P: PotentialSpec,
    variant: str,
    n: int,
    cs: CoarseSpec | None,
    sampler_kind: str,
    h_values: np.ndarray,
    t_equil: float,
    t_measure: float,
    rng: RngState,
    initial: np.ndarray,
    **options,
) -> list[HysteresisPoint]:
    """Sweep the external field up then down; each point equilibrates for
    t_equil, then time-averages coverage for t_measure.  The final state at
    each field seeds the next."""
    gen = rng.generator()
    schedule = [(float(h), "up") for h in h_values] + [(float(h), "down") for h in h_values[::-1]]
    state = initial.copy()
    points: list[HysteresisPoint] = []
    for h, direction in schedule:
        model = RateModel(variant, replace(P, h=h), n, cs=cs)
        sampler = make_sampler(sampler_kind, model, state, **options)
        stats = drive(sampler, gen, t_equil)
        absorbed = stats.absorbed
        obs = TimeAverageObserver(t_start=sampler.t, initial_coverage=sampler.coverage(),
                                  t_end=sampler.t + t_measure)
        stats = drive(sampler, gen, sampler.t + t_measure, observers=(obs,))
        absorbed = absorbed or stats.absorbed
        points.append(HysteresisPoint(h, obs.mean, obs.stderr, direction, absorbed))
        state = sampler.eta.copy() if sampler_kind == "cgmc" else sampler.occ.copy()
    return points


def hysteresis_loop_area(points: list[HysteresisPoint]) -> float:
    """Integral of (up branch - down branch) coverage over the field range."""
    up = sorted((p.h, p.mean_coverage) for p in points if p.direction == "up")
    down = sorted((p.h, p.mean_coverage) for p in points if p.direction == "down")
    if len(up) != len(down):
        raise ConfigurationError("up and down branches have different lengths")
    hs = np.array([h for h, _ in up])
    gap = np.array([abs(cu - cd) for (_, cu), (_, cd) in zip(up, down)])
    return float(np.trapezoid(gap, hs))


# ---------------------------------------------------------------------------
# Relative-entropy-rate estimator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyRateEstimate:
    h_hat: float
    stderr: float
    n_samples: int


def entropy_rate_state_term(occ: np.ndarray, approx: RateModel, micro: RateModel) -> float:
    """Per-particle information-loss integrand at one state,

        (1/N) sum_x [ c(x) - c_approx(x) + c_approx(x) log(c_approx(x) / c(x)) ],

    the jump-process relative-entropy rate of the approximate path measure
    with respect to the reference one.  Each summand is nonnegative (Gibbs
    inequality) and vanishes iff the rates coincide.
    """
    c_tilde = combined_rates_all(occ, approx)
    c_ref = micro_rates_all(occ, micro)
    bad = (c_ref == 0.0) & (c_tilde > 0.0)
    if bad.any():
        raise ConfigurationError("reference rate vanishes where the approximate rate is positive")
    diff = float(c_ref.sum() - c_tilde.sum())
    mask = c_tilde > 0.0
    log_term = float(np.sum(c_tilde[mask] * np.log(c_tilde[mask] / c_ref[mask])))
    return (diff + log_term) / occ.size


def entropy_rate_estimator(
    model: RateModel,
    initial: np.ndarray,
    rng: RngState,
    n_samples: int = 500,
    stride_events: int | None = None,
    burn_in_events: int | None = None,
    bound_mode: str = "crude",
) -> EntropyRateEstimate:
    """A-posteriori information-loss rate, sampled along a two-level trajectory.

    States are taken every ``stride_events`` accepted events (default N, a
    decorrelation heuristic) after a burn-in, and the estimator averages the
    per-state integrand against the microscopic reference rates.
    """
    micro = RateModel(MICROSCOPIC, model.P, model.n)
    gen = rng.generator()
    sampler = make_sampler("mlkmc", model, initial, bound_mode=bound_mode)
    stride = stride_events if stride_events is not None else model.n
    burn = burn_in_events if burn_in_events is not None else 10 * model.n
    flips = 0
    while flips < burn:
        rec = sampler.step(gen)
        flips += rec.accepted
    acc = MeanAccumulator()
    flips = 0
    while acc.count < n_samples:
        rec = sampler.step(gen)
        flips += rec.accepted
        if flips >= stride:
            acc.add(entropy_rate_state_term(sampler.occ, model, micro))
            flips = 0
    return EntropyRateEstimate(h_hat=acc.mean, stderr=acc.stderr, n_samples=acc.count)
