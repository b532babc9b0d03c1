"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The exit-time reproductions (criteria 4 and 5) drive the microscopic
null-event sampler at N = 1024 and dominate the runtime (several minutes on
one core; the reference tables were produced the same way).  Replica counts
scale with the LATKMC_ACCEPT_SCALE environment variable (default 1.0 = the
criterion minimums); scaling below 1 is for quick smoke runs only.
"""

import math
import os
import time

import numpy as np
import pytest

from latkmc.lattice import CoarseSpec, coarsen, empty_config
from latkmc.potentials import PotentialSpec, closed_form_coverage
from latkmc.rates import (
    COARSE_GRAINED,
    CRUDE,
    EXACT_SUM,
    MICROSCOPIC,
    TWO_LEVEL_EXACT,
    TWO_LEVEL_SPLIT,
    RateModel,
    combined_rate,
    combined_rates_all,
    micro_rate,
    rate_bounds,
)
from latkmc.samplers import RngState, TwoLevelSampler, drive, make_sampler, run_trajectory
from latkmc.observables import (
    TimeAverageObserver,
    entropy_rate_estimator,
    entropy_rate_state_term,
    exit_time_ensemble,
    summarize_exit_times,
)
from latkmc import oracle

SCALE = float(os.environ.get("LATKMC_ACCEPT_SCALE", "1.0"))


def _n_rep(base: int) -> int:
    return max(10, int(round(base * SCALE)))


def _report(criterion: str, passed: bool, detail: str) -> None:
    print(f"[criterion {criterion}] {'PASS' if passed else 'FAIL'}: {detail}")


def _overlaps(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


# ---------------------------------------------------------------------------
# 1. Exact-variant identity
# ---------------------------------------------------------------------------


def test_criterion_1_exact_variant_identity():
    t0 = time.perf_counter()
    P = PotentialSpec(K=1.5, J=3.0, h=0.7, beta=0.9)
    worst = 0.0
    for n in (4, 6, 8, 10):
        m_mi = RateModel(MICROSCOPIC, P, n)
        for q in (1, 2, n // 2, n):
            if n % q:
                continue
            cs = CoarseSpec(n=n, q=q)
            m_ex = RateModel(TWO_LEVEL_EXACT, P, n, cs=cs)
            for occ in oracle.all_configs(n):
                eta = coarsen(occ, cs)
                for x in range(n):
                    want = micro_rate(x, occ, m_mi)
                    got = combined_rate(x, occ, m_ex, eta=eta)
                    worst = max(worst, abs(got - want) / max(1.0, want))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12
    _report("1", ok, f"max relative deviation {worst:.2e} (tol 1e-12), N<=10 exhaustive, {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 2. Detailed balance
# ---------------------------------------------------------------------------


def test_criterion_2_detailed_balance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024_02)
    worst_micro = worst_split = 0.0
    for _ in range(5):
        P = PotentialSpec(
            K=float(rng.uniform(-2, 3)),
            J=float(rng.uniform(0, 4)),
            h=float(rng.uniform(-1, 2)),
            beta=float(rng.uniform(0.5, 1.5)),
        )
        worst_micro = max(
            worst_micro, oracle.detailed_balance_check(RateModel(MICROSCOPIC, P, 8), "exact")
        )
        for q in (2, 4):
            m_sp = RateModel(TWO_LEVEL_SPLIT, P, 8, cs=CoarseSpec(n=8, q=q))
            worst_split = max(worst_split, oracle.detailed_balance_check(m_sp, "split"))
    elapsed = time.perf_counter() - t0
    ok = worst_micro < 1e-10 and worst_split < 1e-10
    _report("2", ok, f"max violation micro {worst_micro:.2e}, split {worst_split:.2e} "
                     f"(tol 1e-10), {elapsed:.1f}s")
    assert ok


# ---------------------------------------------------------------------------
# 3. Master-equation oracle equivalence
# ---------------------------------------------------------------------------


def test_criterion_3_master_equation_equivalence():
    t0 = time.perf_counter()
    n, t_final = 6, 1.0
    param_sets = [
        dict(K=1.0, J=2.0, h=0.8, beta=1.0, q=3),
        dict(K=0.5, J=1.5, h=-0.3, beta=1.2, q=2),
        dict(K=2.0, J=0.0, h=1.0, beta=0.8, q=3),
    ]
    n_rep = _n_rep(10_000)
    worst_z = 0.0
    rows = []
    for si, ps in enumerate(param_sets):
        P = PotentialSpec(K=ps["K"], J=ps["J"], h=ps["h"], beta=ps["beta"])
        micro = RateModel(MICROSCOPIC, P, n)
        Q = oracle.build_generator(micro, n)
        p0 = np.zeros(1 << n)
        p0[0] = 1.0
        ref = oracle.expected_coverage(oracle.master_equation_evolve(Q, p0, t_final), n)
        exact = RateModel(TWO_LEVEL_EXACT, P, n, cs=CoarseSpec(n=n, q=ps["q"]))
        for kind, model, opts in (
            ("ssa", micro, {}),
            ("bkl", micro, {"allow_long_range": ps["J"] != 0.0}),
            ("null-event", micro, {}),
            ("mlkmc", exact, {"bound_mode": CRUDE}),
        ):
            vals = np.empty(n_rep)
            for i in range(n_rep):
                stats = run_trajectory(
                    empty_config(n), kind, model, t_final, rng=RngState(300 + si, i), **opts
                )
                vals[i] = stats.final_coverage
            se = vals.std(ddof=1) / math.sqrt(n_rep)
            z = abs(vals.mean() - ref) / se
            worst_z = max(worst_z, z)
            rows.append(f"{kind}@set{si}: z={z:.2f}")
    elapsed = time.perf_counter() - t0
    ok = worst_z <= 3.0
    _report("3", ok, f"max |z| = {worst_z:.2f} over {rows} ({n_rep} replicas each), {elapsed:.0f}s")
    assert ok


# ---------------------------------------------------------------------------
# 4. Table-2 reproduction, mean-field rows
# ---------------------------------------------------------------------------


def _exit_summary(model, kind, initial, threshold, t_final, n_rep, seed, **opts):
    samples = exit_time_ensemble(model, kind, initial, threshold, t_final, n_rep, seed, **opts)
    return summarize_exit_times(samples), samples


def test_criterion_4_table2_mean_field_rows():
    t0 = time.perf_counter()
    n = 1024
    cs = CoarseSpec(n=n, q=n)
    eta0 = np.zeros(1, dtype=np.int64)
    n_rep = _n_rep(1000)
    results = {}

    # Row K=0, h=1: reference intervals 28.5 +- 0.8 (micro), 28.3 +- 0.8 (two-level)
    P1 = PotentialSpec(K=0.0, J=5.0, h=1.0)
    m_mi = RateModel(MICROSCOPIC, P1, n)
    m_tl = RateModel(TWO_LEVEL_SPLIT, P1, n, cs=cs)
    s, _ = _exit_summary(m_mi, "null-event", empty_config(n), 0.99, 300.0, n_rep, seed=401)
    results["row1-micro"] = (s, (27.7, 29.3))
    s, _ = _exit_summary(m_tl, "mlkmc", empty_config(n), 0.99, 300.0, n_rep, seed=402)
    results["row1-mlkmc"] = (s, (27.5, 29.1))

    # Row K=2, h=2: 6.40 +- 0.03 (micro, two-level), 6.20 +- 0.02 (coarse-only)
    P2 = PotentialSpec(K=2.0, J=5.0, h=2.0)
    m_mi2 = RateModel(MICROSCOPIC, P2, n)
    m_tl2 = RateModel(TWO_LEVEL_SPLIT, P2, n, cs=cs)
    m_cg2 = RateModel(COARSE_GRAINED, P2, n, cs=cs)
    s, _ = _exit_summary(m_mi2, "null-event", empty_config(n), 0.99, 60.0, n_rep, seed=403)
    results["row2-micro"] = (s, (6.37, 6.43))
    s, _ = _exit_summary(m_tl2, "mlkmc", empty_config(n), 0.99, 60.0, n_rep, seed=404)
    results["row2-mlkmc"] = (s, (6.37, 6.43))
    s, _ = _exit_summary(m_cg2, "cgmc", eta0, 0.99, 60.0, n_rep, seed=405)
    results["row2-cgmc"] = (s, (6.18, 6.22))

    ok = True
    details = []
    for name, (s, ref) in results.items():
        ci = tuple(s["ci95"])
        good = _overlaps(ci, ref) and s["n_censored"] == 0
        ok = ok and good
        details.append(f"{name}: {s['mean']:.2f} CI [{ci[0]:.2f},{ci[1]:.2f}] vs [{ref[0]},{ref[1]}]")
    elapsed = time.perf_counter() - t0
    _report("4", ok, "; ".join(details) + f" ({n_rep} replicas, {elapsed:.0f}s)")
    assert ok


# ---------------------------------------------------------------------------
# 5. Finite-range failure mode of the coarse-only sampler
# ---------------------------------------------------------------------------


def test_criterion_5_finite_range_failure_mode():
    t0 = time.perf_counter()
    n = 1024
    cs = CoarseSpec(n=n, q=n)
    P = PotentialSpec(K=3.0, J=5.0, L=100, h=3.1)
    n_mi = _n_rep(150)
    n_tl = _n_rep(300)
    n_cg = _n_rep(150)

    m_mi = RateModel(MICROSCOPIC, P, n)
    s_mi, _ = _exit_summary(m_mi, "null-event", empty_config(n), 0.99, 200.0, n_mi, seed=501)
    m_tl = RateModel(TWO_LEVEL_SPLIT, P, n, cs=cs)
    s_tl, _ = _exit_summary(m_tl, "mlkmc", empty_config(n), 0.99, 200.0, n_tl, seed=502)
    m_cg = RateModel(COARSE_GRAINED, P, n, cs=cs)
    t_window = 60.0
    _, cg_samples = _exit_summary(m_cg, "cgmc", np.zeros(1, dtype=np.int64), 0.99, t_window, n_cg, seed=503)
    # censored samples carry tau = t_final; the coarse-only sampler gets stuck,
    # so the censoring-inclusive mean is the honest lower bound on its tau
    cg_mean_incl = float(np.mean([s.tau for s in cg_samples]))
    cg_censored = sum(s.censored for s in cg_samples) / len(cg_samples)

    rel = abs(s_tl["mean"] - s_mi["mean"]) / s_mi["mean"]
    ok = rel <= 0.15 and cg_mean_incl > 2.0 * s_mi["mean"]
    elapsed = time.perf_counter() - t0
    _report(
        "5",
        ok,
        f"micro {s_mi['mean']:.2f}, two-level {s_tl['mean']:.2f} (rel dev {rel:.1%} <= 15%), "
        f"coarse-only >= {cg_mean_incl:.1f} ({cg_censored:.0%} censored at {t_window}) "
        f"> 2x micro ({2 * s_mi['mean']:.1f}); {elapsed:.0f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 6. Weak-error scaling
# ---------------------------------------------------------------------------


def test_criterion_6_weak_error_scaling():
    t0 = time.perf_counter()
    # L = N/2 keeps every tested block size in the first-order regime.
    P = PotentialSpec(K=0.5, J=3.0, L=6, profile="cosine", h=1.0)
    scan = dict(oracle.weak_error_scan(P, 12, [1, 2, 3, 4, 6], T=1.0))
    r42 = scan[4] / scan[2]
    r63 = scan[6] / scan[3]
    ok = scan[1] <= 1e-12 and 1.3 <= r42 <= 3.0 and 1.3 <= r63 <= 3.0
    elapsed = time.perf_counter() - t0
    _report(
        "6",
        ok,
        f"error(1)={scan[1]:.1e}, ratios err(4)/err(2)={r42:.2f}, err(6)/err(3)={r63:.2f} "
        f"(window [1.3, 3]), {elapsed:.0f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 7. Stationary relative-entropy scaling
# ---------------------------------------------------------------------------


def test_criterion_7_relative_entropy_scaling():
    t0 = time.perf_counter()
    P = PotentialSpec(K=0.5, J=3.0, L=12, profile="cosine", h=1.0)
    mu = oracle.enumerate_gibbs(P, 12)
    R = {}
    for q in (2, 3, 4, 6):
        mut = oracle.enumerate_gibbs(P, 12, hamiltonian="split", cs=CoarseSpec(n=12, q=q))
        R[q] = oracle.relative_entropy_per_particle(mu, mut)
    # The q-doubling window is probed at (3, 6); the (2, 4) doubling sits in
    # the second-order (quadratic) regime where the linear KL term cancels.
    ratio = R[6] / R[3]
    monotone = R[2] < R[3] < R[4] < R[6]

    Pc = PotentialSpec(K=1.0, J=2.0, h=0.5)  # constant profile, L = N
    mu_c = oracle.enumerate_gibbs(Pc, 12)
    mut_c = oracle.enumerate_gibbs(Pc, 12, hamiltonian="split", cs=CoarseSpec(n=12, q=4))
    r_const = oracle.relative_entropy_per_particle(mu_c, mut_c)

    ok = monotone and 1.5 <= ratio <= 2.5 and r_const < 1e-12
    elapsed = time.perf_counter() - t0
    _report(
        "7",
        ok,
        f"R={[f'{R[q]:.2e}' for q in (2, 3, 4, 6)]}, doubling ratio R(6)/R(3)={ratio:.2f} "
        f"(window [1.5, 2.5]), constant-profile R={r_const:.1e}, {elapsed:.0f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 8. A-posteriori information-loss estimator
# ---------------------------------------------------------------------------


def test_criterion_8_entropy_rate_estimator():
    t0 = time.perf_counter()
    # Exact variant: the bracket vanishes termwise at every state.
    rng = np.random.default_rng(8)
    n_small = 64
    Pe = PotentialSpec(K=1.0, J=3.0, h=1.0)
    exact = RateModel(TWO_LEVEL_EXACT, Pe, n_small, cs=CoarseSpec(n=n_small, q=16))
    micro = RateModel(MICROSCOPIC, Pe, n_small)
    exact_zero = all(
        entropy_rate_state_term((rng.random(n_small) < rng.random()).astype(np.int64), exact, micro) == 0.0
        for _ in range(50)
    )
    split1 = RateModel(TWO_LEVEL_SPLIT, Pe, n_small, cs=CoarseSpec(n=n_small, q=1))
    split1_zero = all(
        abs(entropy_rate_state_term((rng.random(n_small) < rng.random()).astype(np.int64), split1, micro))
        < 1e-15
        for _ in range(50)
    )

    # Monotone growth with the block size at finite interaction range.
    n = 1024
    P = PotentialSpec(K=1.0, J=5.0, L=100, h=2.5)
    ests = {}
    for q in (4, 16, 64):
        model = RateModel(TWO_LEVEL_SPLIT, P, n, cs=CoarseSpec(n=n, q=q))
        ests[q] = entropy_rate_estimator(
            model, empty_config(n), RngState(800, q), n_samples=_n_rep(150)
        )
    sep_a = ests[16].h_hat - ests[4].h_hat > 3 * math.hypot(ests[16].stderr, ests[4].stderr)
    sep_b = ests[64].h_hat - ests[16].h_hat > 3 * math.hypot(ests[64].stderr, ests[16].stderr)
    nonneg = all(e.h_hat + 3 * e.stderr >= 0 for e in ests.values())

    ok = exact_zero and split1_zero and sep_a and sep_b and nonneg
    elapsed = time.perf_counter() - t0
    _report(
        "8",
        ok,
        f"exact=0 {exact_zero}, split(q=1)=0 {split1_zero}, "
        f"h_hat(q=4,16,64)=({ests[4].h_hat:.2e}, {ests[16].h_hat:.2e}, {ests[64].h_hat:.2e}) "
        f"monotone, {elapsed:.0f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 9. Lumpable zero-rejection and the normalisation bound
# ---------------------------------------------------------------------------


def test_criterion_9_lumpable_and_bound():
    t0 = time.perf_counter()
    # Uniform reconstruction: K = 0, h = 0 (beta kept moderate so events flow).
    n = 256
    P = PotentialSpec(K=0.0, J=2.0, h=0.0, beta=0.5)
    model = RateModel(TWO_LEVEL_SPLIT, P, n, cs=CoarseSpec(n=n, q=16))
    sampler = make_sampler("mlkmc", model, empty_config(n), bound_mode=EXACT_SUM)
    gen = RngState(900).generator()
    nulls = 0
    while sampler.step_count < 100_000:
        rec = sampler.step(gen)
        nulls += not rec.accepted
    zero_rejections = nulls == 0

    # Lemma 3.1 on 1e4 random states, both bound modes.
    nb = 64
    Pb = PotentialSpec(K=1.0, J=5.0, h=2.5)
    mb = RateModel(TWO_LEVEL_SPLIT, Pb, nb, cs=CoarseSpec(n=nb, q=16))
    rng = np.random.default_rng(901)
    worst = -math.inf
    for _ in range(10_000):
        occ = (rng.random(nb) < rng.random()).astype(np.int64)
        lam_tilde = float(combined_rates_all(occ, mb).sum())
        for mode in (CRUDE, EXACT_SUM):
            b = rate_bounds(occ, mb, bound_mode=mode)
            worst = max(worst, lam_tilde - b.lambda_tilde_star * (1 + 1e-12))
    bound_holds = worst <= 0.0
    ok = zero_rejections and bound_holds
    elapsed = time.perf_counter() - t0
    _report(
        "9",
        ok,
        f"{nulls} rejections in 1e5 proposals; max(lambda_tilde - bound) = {worst:.2e} "
        f"over 1e4 states x 2 modes, {elapsed:.0f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 10. Performance trend
# ---------------------------------------------------------------------------


def _bench_once(kind, n, P, t_final, seed):
    cs = CoarseSpec(n=n, q=n)
    if kind == "mlkmc":
        model = RateModel(TWO_LEVEL_SPLIT, P, n, cs=cs)
        opts = {"bound_mode": CRUDE}
    else:
        model = RateModel(MICROSCOPIC, P, n)
        opts = {}
    sampler = make_sampler(kind, model, empty_config(n), **opts)
    gen = RngState(seed).generator()
    t0 = time.perf_counter()
    drive(sampler, gen, t_final)
    return time.perf_counter() - t0


def test_criterion_10_performance_trend():
    t0 = time.perf_counter()
    P = PotentialSpec(K=1.0, J=5.0, h=2.5)
    sizes = (512, 1024, 2048)
    ratios = {}
    for n in sizes:
        wall_null = min(_bench_once("null-event", n, P, 20.0, seed=1000 + r) for r in range(2))
        wall_ml = min(_bench_once("mlkmc", n, P, 20.0, seed=1100 + r) for r in range(2))
        ratios[n] = wall_null / wall_ml
    ok = ratios[512] >= 10.0 and ratios[512] < ratios[1024] < ratios[2048]
    elapsed = time.perf_counter() - t0
    _report(
        "10",
        ok,
        "speedup null-event/two-level: "
        + ", ".join(f"N={n}: {ratios[n]:.0f}x" for n in sizes)
        + f" (>=10x at 512, increasing), {elapsed:.0f}s",
    )
    assert ok


# ---------------------------------------------------------------------------
# 11. Equilibrium coverage vs the closed form
# ---------------------------------------------------------------------------


def _time_average(model, kind, initial, burn_in, t_measure, seed, **opts):
    sampler = make_sampler(kind, model, initial, **opts)
    gen = RngState(seed).generator()
    drive(sampler, gen, burn_in)
    obs = TimeAverageObserver(t_start=sampler.t, initial_coverage=sampler.coverage(),
                              t_end=sampler.t + t_measure)
    drive(sampler, gen, sampler.t + t_measure, observers=(obs,))
    return obs.mean, obs.stderr


def test_criterion_11_equilibrium_vs_closed_form():
    t0 = time.perf_counter()
    # (a) symmetry point: coverage is exactly 1/2 in any convention.
    n = 512
    Pa = PotentialSpec(K=1.0, J=2.0, h=1.5)
    ma = RateModel(TWO_LEVEL_SPLIT, Pa, n, cs=CoarseSpec(n=n, q=n))
    mean_a, se_a = _time_average(ma, "mlkmc", empty_config(n), 50.0, 400.0, seed=1101)
    ok_a = abs(mean_a - 0.5) <= 3 * se_a

    # (b) off-centre single-phase point against the closed form, evaluated at
    # the mirrored field (the published formula's h-orientation is the
    # particle-hole image of the dynamic convention).
    n = 1024
    Pb = PotentialSpec(K=0.0, J=2.0, h=0.6)
    predicted = closed_form_coverage(0.0, 2.0, 2.0 - 0.6)[0]
    mb = RateModel(TWO_LEVEL_SPLIT, Pb, n, cs=CoarseSpec(n=n, q=n))
    mean_b, se_b = _time_average(mb, "mlkmc", empty_config(n), 30.0, 400.0, seed=1102)
    ok_b = abs(mean_b - predicted) <= 3 * se_b

    ok = ok_a and ok_b
    elapsed = time.perf_counter() - t0
    _report(
        "11",
        ok,
        f"symmetric point {mean_a:.4f} +- {se_a:.4f} vs 0.5; "
        f"single-phase {mean_b:.4f} +- {se_b:.4f} vs closed form {predicted:.4f}, {elapsed:.0f}s",
    )
    assert ok
