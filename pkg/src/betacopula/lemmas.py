"""Computable checks of the finite-sample lemmas behind the weighted process results.

Every check returns a plain dict with the analytic bound next to the Monte
Carlo frequency it should dominate, plus a ``passed`` flag.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .core import RngStream, TiePolicy, as_stream, compute_ranks
from .estimators import boundary_envelope, verify_boundary_negligibility, verify_smoothing_identity
from .models import GumbelCopula
from .special import (
    BinomialSpec,
    bennett_tail_bound,
    bennett_tail_frequency,
    g_concentration_bounds,
    g_concentration_frequencies,
    verify_recip_binom_rate,
)

SE_MULTIPLIER = 3.0


def check_bennett(rng: RngStream | int = 0, draws: int = 100_000,
                  cases: Iterable[tuple[int, float, float]] | None = None) -> dict:
    """Bennett tail bound against binomial tail frequencies."""
    rng = as_stream(rng)
    cases = cases or [(n, u, dl) for n in (50, 200) for u in (0.05, 0.3, 0.7) for dl in (0.25, 0.5, 1.0)]
    rows = []
    for k, (n, u, delta) in enumerate(cases):
        bound = bennett_tail_bound(BinomialSpec(n, u), delta)
        freq, se = bennett_tail_frequency(BinomialSpec(n, u), delta, draws, rng.child(k).generator())
        rows.append({"n": n, "u": u, "delta": delta, "bound": bound, "frequency": freq, "mc_se": se,
                     "passed": freq <= bound + SE_MULTIPLIER * se})
    return {"check": "bennett", "draws": draws, "cases": rows, "passed": all(r["passed"] for r in rows)}


def check_g_bounds(rng: RngStream | int = 0, draws: int = 100_000) -> dict:
    """Concentration of ``g(S/n)`` around ``g(u)``, both directions."""
    rng = as_stream(rng)
    points = [(0.2, 0.7), (0.5, 0.5), (0.1, 0.95), (0.3, 0.6, 0.8), (0.9, 0.9, 0.2)]
    rows = []
    k = 0
    for n in (50, 200):
        for u in points:
            for delta in (0.25, 0.5):
                upper, lower = g_concentration_bounds(n, u, delta)
                freq = g_concentration_frequencies(n, u, delta, draws, rng.child(k).generator())
                k += 1
                ok = (freq["upper_freq"] <= upper + SE_MULTIPLIER * freq["upper_se"]
                      and freq["lower_freq"] <= lower + SE_MULTIPLIER * freq["lower_se"])
                rows.append({"n": n, "u": list(u), "delta": delta, "upper_bound": upper, "lower_bound": lower,
                             **freq, "passed": ok})
    return {"check": "g-bounds", "draws": draws, "cases": rows, "passed": all(r["passed"] for r in rows)}


def check_recip_binom() -> dict:
    return verify_recip_binom_rate()


def check_smoothing(rng: RngStream | int = 0, n: int = 40, mc_draws: int = 20_000) -> dict:
    """Empirical beta copula as the binomial average of the empirical copula."""
    rng = as_stream(rng)
    x = GumbelCopula(0.5, d=3).sample(n, rng.named("sample").generator())
    ranks = compute_ranks(x, TiePolicy.STABLE)
    rows = []
    for k, u in enumerate([(0.3, 0.5, 0.7), (0.9, 0.9, 0.1), (0.05, 0.6, 0.95)]):
        res = verify_smoothing_identity(ranks, u, mc_draws, rng.child(k).generator())
        rows.append({"u": list(u), "beta_copula": res.lhs, "binomial_average": res.rhs_estimate,
                     "mc_se": res.mc_se, "passed": res.passed})
    return {"check": "smoothing", "n": n, "cases": rows, "passed": all(r["passed"] for r in rows)}


def check_boundary(rng: RngStream | int = 0, omega: float = 0.25, gamma_exp: float = 1.0,
                   exponents: Iterable[int] = range(8, 13), replicates: int = 50,
                   probe_count: int = 200, alpha: float = 0.5) -> dict:
    """Weighted beta process on the shell ``{g <= n^-gamma}`` against its envelope.

    Passes when every replicate maximum stays below the envelope and the
    mean maximum decreases in ``n`` (negative log-log slope).
    """
    rng = as_stream(rng)
    model = GumbelCopula(alpha)
    rows = []
    for e in exponents:
        n = 2**e
        stream = rng.named(f"n{n}")

        def one(i: int) -> float:
            child = stream.child(i)
            x = model.sample(n, child.named("sample").generator())
            ranks = compute_ranks(x, TiePolicy.STABLE)
            return verify_boundary_negligibility(ranks, model, omega, gamma_exp, probe_count,
                                                 child.named("probes").generator())

        maxima = np.array([one(i) for i in range(replicates)])
        env = boundary_envelope(n, 2, omega, gamma_exp)
        rows.append({"n": n, "envelope": env, "max": float(maxima.max()), "mean": float(maxima.mean()),
                     "passed": bool(maxima.max() <= env)})
    ns = np.array([r["n"] for r in rows], dtype=float)
    means = np.array([r["mean"] for r in rows])
    slope = float(np.polyfit(np.log(ns), np.log(np.maximum(means, 1e-300)), 1)[0]) if len(rows) > 1 else 0.0
    return {"check": "boundary", "omega": omega, "gamma": gamma_exp, "replicates": replicates,
            "cases": rows, "log_log_slope": slope,
            "passed": all(r["passed"] for r in rows) and slope < 0}


CHECKS: dict[str, Callable[..., dict]] = {
    "bennett": check_bennett,
    "g-bounds": check_g_bounds,
    "recip-binom": lambda rng=0: check_recip_binom(),
    "smoothing": check_smoothing,
    "boundary": check_boundary,
}


def run_lemma_suite(only: Iterable[str] | None = None, rng: RngStream | int = 0) -> dict:
    """Run the named checks (all by default), each on its own stream."""
    rng = as_stream(rng)
    names = list(only) if only else list(CHECKS)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {sorted(CHECKS)}")
    results = [CHECKS[name](rng=rng.named(name)) for name in names]
    return {"checks": results, "passed": all(r["passed"] for r in results)}

