"""Machine-checkable consistency suite behind the `validate` subcommand.

Fast level: small-system identities (N <= 8) in a few seconds.  Full level
adds N = 12 balance checks, the coarse-graining error scans and negative
controls.  Every check reports a measured value and its threshold so the JSON
report is useful on failure.
"""

from __future__ import annotations

import numpy as np

from .lattice import CoarseSpec, coarsen
from .potentials import PotentialSpec
from .rates import (
    CRUDE,
    EXACT_SUM,
    MICROSCOPIC,
    TWO_LEVEL_EXACT,
    TWO_LEVEL_SPLIT,
    RateModel,
    coarse_rates,
    combined_rate,
    combined_rates_all,
    micro_rate,
    micro_rates_all,
    rate_bounds,
)
from . import oracle


def _check(name: str, value: float, threshold: float, passed: bool | None = None, detail: str = "") -> dict:
    ok = (value <= threshold) if passed is None else passed
    return {"name": name, "passed": bool(ok), "value": float(value), "threshold": float(threshold), "detail": detail}


def random_occupancy(n: int, rng: np.random.Generator) -> np.ndarray:
    density = rng.random()
    return (rng.random(n) < density).astype(np.int64)


def exact_identity_violation(P: PotentialSpec, n: int, q: int) -> float:
    """Max |combined(exact) - micro| over all configurations and sites."""
    cs = CoarseSpec(n=n, q=q)
    m_ex = RateModel(TWO_LEVEL_EXACT, P, n, cs=cs)
    m_mi = RateModel(MICROSCOPIC, P, n)
    worst = 0.0
    for i in range(1 << n):
        occ = oracle.all_configs(n)[i]
        eta = coarsen(occ, cs)
        for x in range(n):
            c1 = combined_rate(x, occ, m_ex, eta=eta)
            c0 = micro_rate(x, occ, m_mi)
            worst = max(worst, abs(c1 - c0) / max(1.0, c0))
    return worst


def q1_coarse_equals_micro(P: PotentialSpec, n: int) -> float:
    """At q=1 the full coarse rates must equal the microscopic site rates."""
    cs = CoarseSpec(n=n, q=1)
    m_cg = RateModel("coarse-grained", P, n, cs=cs)
    m_mi = RateModel(MICROSCOPIC, P, n)
    worst = 0.0
    for i in range(1 << n):
        occ = oracle.all_configs(n)[i]
        eta = coarsen(occ, cs)
        micro = micro_rates_all(occ, m_mi)
        for k in range(n):
            c_a, c_d = coarse_rates(k, eta, m_cg, which="full")
            want = micro[k]
            got = c_a if occ[k] == 0 else c_d
            worst = max(worst, abs(got - want))
    return worst


def lemma31_margin(P: PotentialSpec, n: int, q: int, n_states: int, seed: int, bound_mode: str) -> float:
    """Max of lambda_tilde - lambda_tilde_star over random states (<= 0 required)."""
    cs = CoarseSpec(n=n, q=q)
    model = RateModel(TWO_LEVEL_SPLIT, P, n, cs=cs)
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(n_states):
        occ = random_occupancy(n, rng)
        b = rate_bounds(occ, model, bound_mode=bound_mode)
        lam_tilde = float(combined_rates_all(occ, model).sum())
        worst = max(worst, lam_tilde - b.lambda_tilde_star * (1.0 + 1e-12))
    return worst


def _perturbed_balance_violation(model: RateModel, factor: float) -> float:
    """Balance violation after scaling one desorption rate by `factor`."""
    n = model.n
    E = oracle.energies_all(model.P, n, hamiltonian="exact", cs=model.cs)
    logw = -model.P.beta * E
    w = np.exp(logw - logw.max())
    R = oracle._site_rate_matrix(model, n)
    full = (1 << n) - 1
    R[full, 0] *= factor  # desorption out of the fully occupied state
    idx = np.arange(1 << n)
    worst = 0.0
    for x in range(n):
        worst = max(worst, float(np.abs(R[:, x] * w - R[idx ^ (1 << x), x] * w[idx ^ (1 << x)]).max()))
    return worst


def run_validation(level: str = "fast") -> dict:
    checks: list[dict] = []
    rng = np.random.default_rng(20240810)

    # Exact two-level factorisation reproduces the microscopic rates.
    P = PotentialSpec(K=1.5, J=3.0, h=0.7, beta=1.0)
    checks.append(
        _check("exact-variant identity (N=8, q=4)", exact_identity_violation(P, 8, 4), 1e-12)
    )
    checks.append(
        _check("exact-variant identity (N=8, q=2)", exact_identity_violation(P, 8, 2), 1e-12)
    )

    # Detailed balance across random parameter sets.
    worst_micro = 0.0
    worst_split = 0.0
    for _ in range(5):
        K, J, h = rng.uniform(-2, 3), rng.uniform(0, 4), rng.uniform(-1, 2)
        beta = rng.uniform(0.5, 1.5)
        Pr = PotentialSpec(K=K, J=J, h=h, beta=beta)
        m_mi = RateModel(MICROSCOPIC, Pr, 8)
        worst_micro = max(worst_micro, oracle.detailed_balance_check(m_mi, hamiltonian="exact"))
        m_sp = RateModel(TWO_LEVEL_SPLIT, Pr, 8, cs=CoarseSpec(n=8, q=4))
        worst_split = max(worst_split, oracle.detailed_balance_check(m_sp, hamiltonian="split"))
    checks.append(_check("detailed balance, microscopic (N=8, 5 param sets)", worst_micro, 1e-10))
    checks.append(_check("detailed balance, split (N=8, q=4, 5 param sets)", worst_split, 1e-10))

    # Reconstruction normalisation bound.
    n_states = 1000 if level == "fast" else 10000
    Pl = PotentialSpec(K=1.0, J=5.0, h=2.5, beta=1.0)
    for mode in (CRUDE, EXACT_SUM):
        margin = lemma31_margin(Pl, 64, 16, n_states, seed=5, bound_mode=mode)
        checks.append(
            _check(f"lambda_tilde <= lambda_tilde_star ({mode}, {n_states} states)", margin, 0.0)
        )

    # Trivial coarsening: q = 1 coarse rates equal microscopic rates.
    checks.append(_check("q=1 coarse rates equal microscopic (N=8)", q1_coarse_equals_micro(P, 8), 1e-12))

    # Generator structure and stationarity.
    m6 = RateModel(MICROSCOPIC, PotentialSpec(K=0.8, J=1.5, h=0.4), 6)
    Q = oracle.build_generator(m6, 6)
    rowsum = float(np.abs(np.asarray(Q.sum(axis=1))).max())
    checks.append(_check("generator row sums vanish (N=6)", rowsum, 1e-12))
    mu = oracle.enumerate_gibbs(m6.P, 6)
    checks.append(_check("Gibbs measure stationary under generator (N=6)", oracle.stationarity_violation(m6, mu), 1e-9))

    # Analytic relaxation of the non-interacting system: c(t) = (1 - e^{-2 d0 t})/2.
    m2 = RateModel(MICROSCOPIC, PotentialSpec(K=0.0, J=0.0, h=0.0), 2)
    Q2 = oracle.build_generator(m2, 2)
    p0 = np.zeros(4)
    p0[0] = 1.0
    t = 0.7
    cov = oracle.expected_coverage(oracle.master_equation_evolve(Q2, p0, t), 2)
    analytic = 0.5 * (1.0 - np.exp(-2.0 * t))
    checks.append(_check("master equation vs 2-state closed form", abs(cov - analytic), 1e-8))

    if level == "full":
        m12 = RateModel(MICROSCOPIC, PotentialSpec(K=1.2, J=2.0, h=0.5, beta=0.9), 12)
        checks.append(_check("detailed balance, microscopic (N=12)", oracle.detailed_balance_check(m12), 1e-10))

        # Weak error vanishes at q=1 and grows with q for a smooth profile.
        Pw = PotentialSpec(K=0.5, J=3.0, L=12, profile="cosine", h=1.0, beta=1.0)
        scan = oracle.weak_error_scan(Pw, 12, [1, 2, 3, 4, 6], T=1.0)
        err = dict(scan)
        checks.append(_check("weak error at q=1", err[1], 1e-12))
        growing = all(err[a] < err[b] for a, b in [(2, 3), (3, 4), (4, 6)])
        checks.append(
            _check("weak error grows with q", 0.0, 1.0, passed=growing,
                   detail=str({k: float(v) for k, v in err.items()}))
        )

        # Stationary information loss: zero for the constant profile at L=N.
        Pc = PotentialSpec(K=1.0, J=2.0, h=0.5)
        mu_c = oracle.enumerate_gibbs(Pc, 12)
        mut_c = oracle.enumerate_gibbs(Pc, 12, hamiltonian="split", cs=CoarseSpec(n=12, q=4))
        checks.append(
            _check("relative entropy zero for constant profile (L=N)",
                   oracle.relative_entropy_per_particle(mu_c, mut_c), 1e-12)
        )

        # Negative control: a single perturbed rate must trip the balance check.
        m8 = RateModel(MICROSCOPIC, PotentialSpec(K=1.0, J=1.0, h=0.5), 8)
        violation = _perturbed_balance_violation(m8, 1.01)
        checks.append(
            _check("negative control: perturbed rate detected", 0.0, 1.0,
                   passed=violation > 1e-3, detail=f"violation={violation:g}")
        )

    return {"level": level, "all_passed": all(c["passed"] for c in checks), "checks": checks}
