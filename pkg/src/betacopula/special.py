"""Beta order-statistic CDFs, binomial moments and binomial tail bounds.

``F_{n,r}`` denotes the CDF of the Beta(r, n + 1 - r) law, which is also the
binomial survival function ``P(Bin(n, u) >= r)``. Two routes are provided:
:func:`beta_order_cdf` evaluates a single value by summing the shorter
binomial tail, and :func:`beta_cdf_table` fills the whole ``n x m`` table ``F_{n,r}(v_k)`` at
once by cumulating binomial probabilities, which is what the estimators use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .core import as_generator, weight_g
from .exceptions import DomainError

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# stirlerr(k) = log(k!) - log(sqrt(2 pi k) (k/e)^k) for k = 0..15
_STIRLERR_SMALL = np.array(
    [0.0]
    + [
        math.lgamma(k + 1.0) - (k + 0.5) * math.log(k) + k - _LN_SQRT_2PI
        for k in range(1, 16)
    ]
)
_S0, _S1, _S2, _S3, _S4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188


@lru_cache(maxsize=8)
def _stirlerr_table(n: int) -> np.ndarray:
    table = _stirlerr_eval(np.arange(n + 1, dtype=float))
    table.flags.writeable = False
    return table


def _stirlerr(k: np.ndarray, n: int | None = None) -> np.ndarray:
    """Error of Stirling's approximation to log(k!) for integer ``k >= 0``.

    With ``n`` given, ``0 <= k <= n`` is looked up in a cached table.
    """
    if n is not None:
        return _stirlerr_table(int(n))[np.asarray(k).astype(np.int64)]
    return _stirlerr_eval(k)


def _stirlerr_eval(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    small = k <= 15
    out[small] = _STIRLERR_SMALL[k[small].astype(int)]
    big = k[~small]
    k2 = big * big
    out[~small] = np.where(
        big > 500,
        (_S0 - _S1 / k2) / big,
        np.where(
            big > 80,
            (_S0 - (_S1 - _S2 / k2) / k2) / big,
            np.where(
                big > 35,
                (_S0 - (_S1 - (_S2 - _S3 / k2) / k2) / k2) / big,
                (_S0 - (_S1 - (_S2 - (_S3 - _S4 / k2) / k2) / k2) / k2) / big,
            ),
        ),
    )
    return out


def _bd0(x: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """Deviance term ``x log(x/mean) + mean - x`` without cancellation."""
    x, mean = np.broadcast_arrays(np.asarray(x, float), np.asarray(mean, float))
    out = np.empty(x.shape)
    near = np.abs(x - mean) < 0.1 * (x + mean)
    if np.any(~near):
        xf, mf = x[~near], mean[~near]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = xf * np.log(xf / mf) + mf - xf
        out[~near] = np.where(xf == 0, mf, val)
    if np.any(near):
        xn, mn = x[near], mean[near]
        v = (xn - mn) / (xn + mn)
        s = (xn - mn) * v
        ej = 2.0 * xn * v
        v2 = v * v
        for j in range(1, 40):
            ej = ej * v2
            s_new = s + ej / (2 * j + 1)
            if np.all(s_new == s):
                break
            s = s_new
        out[near] = s
    return out


def binom_pmf(k, n: int, p) -> np.ndarray:
    """Binomial probabilities with near full relative precision.

    Saddle-point form (Loader's algorithm); broadcasts over ``k`` and ``p``.
    """
    k, p = np.broadcast_arrays(np.asarray(k, float), np.asarray(p, float))
    q = 1.0 - p
    out = np.zeros(k.shape)
    valid = (k >= 0) & (k <= n)
    lo = valid & (k == 0)
    hi = valid & (k == n)
    mid = valid & ~lo & ~hi
    with np.errstate(divide="ignore"):
        out[lo] = np.exp(n * np.log1p(-p[lo]))
        out[hi] = np.exp(n * np.log(p[hi]))
    if np.any(mid):
        km, pm, qm = k[mid], p[mid], q[mid]
        inner = (pm > 0) & (pm < 1)
        vals = np.zeros(km.shape)
        ki, pi, qi = km[inner], pm[inner], qm[inner]
        table_n = n if np.all(ki == np.floor(ki)) else None
        lc = (
            _stirlerr(np.array([float(n)]))
            - _stirlerr(ki, table_n)
            - _stirlerr(n - ki, table_n)
            - _bd0(ki, n * pi)
            - _bd0(n - ki, n * qi)
        )
        # log(n - k) - log(n) rather than log1p(-k/n): the latter cancels for k near n
        lf = 2.0 * _LN_SQRT_2PI + np.log(ki) + np.log(n - ki) - math.log(n)
        vals[inner] = np.exp(lc - 0.5 * lf)
        out[mid] = vals
    return out


def _check_order_args(n: int, r: int, u: float):
    if n < 1 or not 1 <= r <= n:
        raise DomainError(f"need 1 <= r <= n, got n={n}, r={r}")
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"u must lie in [0, 1], got {u}")


def _binomial_tail_sum(n: int, r: int, u: float) -> float:
    """``P(Bin(n, u) >= r)`` summed over the shorter tail, truncated far out."""
    width = int(math.ceil(40.0 * math.sqrt(n * u * (1.0 - u)))) + 64
    if r > n * u:
        s = np.arange(r, min(n, r + width) + 1, dtype=float)
        return float(min(1.0, np.sum(binom_pmf(s, n, u)[::-1])))
    s = np.arange(max(0, r - 1 - width), r, dtype=float)
    return float(max(0.0, 1.0 - np.sum(binom_pmf(s, n, u))))


def beta_order_cdf(n: int, r: int, u: float) -> float:
    """``F_{n,r}(u)``, the Beta(r, n + 1 - r) CDF.

    Uses ``I_u(r, n + 1 - r) = P(Bin(n, u) >= r)`` and sums whichever
    binomial tail is shorter, with probabilities in saddle-point form.
    Absolute error stays near 1e-15 for n up to 1e6, where a continued
    fraction loses several digits.
    """
    _check_order_args(n, r, u)
    if u == 0.0:
        return 0.0
    if u == 1.0:
        return 1.0
    return _binomial_tail_sum(n, r, u)


def beta_cdf_table(n: int, v) -> np.ndarray:
    """Table ``F[r - 1, k] = F_{n,r}(v_k)`` for ``r = 1..n``.

    Computed as binomial upper-tail sums. Only a window of
    ``10 sd + 40`` around the mean is summed; Bernstein's inequality puts
    the mass outside it below 1e-21.
    """
    v = np.asarray(v, dtype=float).ravel()
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    if np.any((v < 0) | (v > 1)):
        raise DomainError("evaluation points must lie in [0, 1]")
    half = np.ceil(10.0 * np.sqrt(n * v * (1.0 - v)) + 40.0)
    lo = np.clip(np.floor(n * v) - half, 0, n).astype(np.int64)
    hi = np.clip(np.ceil(n * v) + half, 0, n).astype(np.int64)
    width = int((hi - lo).max()) + 1 if v.size else 1
    s = lo[:, None] + np.arange(width)[None, :]
    pmf = binom_pmf(s, n, v[:, None])
    pmf[s > hi[:, None]] = 0.0
    # window tail sums plus a trailing zero column
    tail = np.zeros((v.size, width + 1))
    tail[:, :width] = np.minimum(np.cumsum(pmf[:, ::-1], axis=1)[:, ::-1], 1.0)
    # flat gather: row r - 1 of column k reads tail[k, clip(r - lo_k, 0, width)]
    r = np.arange(1, n + 1, dtype=np.int64)[:, None]
    idx = r - lo[None, :]
    np.clip(idx, 0, width, out=idx)
    idx += (np.arange(v.size, dtype=np.int64) * (width + 1))[None, :]
    out = tail.ravel()[idx]
    out[:, v == 0.0] = 0.0
    out[:, v == 1.0] = 1.0
    return out


def h_entropy(x):
    """``h(x) = x (log x - 1) + 1`` for ``x > 0``."""
    x_arr = np.asarray(x, dtype=float)
    if np.any(x_arr <= 0):
        raise DomainError("h is defined for x > 0 only")
    out = x_arr * (np.log(x_arr) - 1.0) + 1.0
    return float(out) if out.ndim == 0 else out


def h_quadratic_lower_bound(delta):
    """``delta^2 / 3``, a lower bound for ``h(1 + delta)`` when ``0 <= delta <= 1``."""
    delta = np.asarray(delta, dtype=float)
    if np.any((delta < 0) | (delta > 1)):
        raise DomainError("quadratic bound holds for delta in [0, 1]")
    out = delta**2 / 3.0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BinomialSpec:
    n: int
    u: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n}")
        if not 0.0 < self.u < 1.0:
            raise DomainError(f"u must lie in (0, 1), got {self.u}")


def bennett_tail_bound(spec: BinomialSpec, delta: float) -> float:
    """Bennett bound ``2 exp(-n u h(1 + delta))`` on ``P(|S/n - u| >= u delta)``."""
    if delta <= 0:
        raise DomainError("delta must be positive")
    return 2.0 * math.exp(-spec.n * spec.u * h_entropy(1.0 + delta))


def g_concentration_bounds(n: int, u, delta: float) -> tuple[float, float]:
    """Bounds on ``P{g(S/n) >= g(u)(1+delta)}`` and ``P{g(S/n) <= g(u)(1-delta)}``.

    ``S_j ~ Bin(n, u_j)`` independent. Returns ``(upper, lower)`` with
    ``upper = 2d exp(-n g(u) h(1+delta))`` and ``lower`` twice that.
    """
    u = np.asarray(u, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise DomainError("all coordinates must lie strictly inside (0, 1)")
    if delta <= 0:
        raise DomainError("delta must be positive")
    d = u.shape[-1]
    core = math.exp(-n * weight_g(u) * h_entropy(1.0 + delta))
    return 2 * d * core, 4 * d * core


def bennett_tail_frequency(spec: BinomialSpec, delta: float, draws: int, rng) -> tuple[float, float]:
    """Monte Carlo estimate (and standard error) of ``P(|S/n - u| >= u delta)``."""
    gen = as_generator(rng)
    s = gen.binomial(spec.n, spec.u, size=draws)
    hits = np.abs(s / spec.n - spec.u) >= spec.u * delta
    p = hits.mean()
    return float(p), float(math.sqrt(p * (1 - p) / draws))


def g_concentration_frequencies(n: int, u, delta: float, draws: int, rng) -> dict:
    """Monte Carlo frequencies of the two events bounded by :func:`g_concentration_bounds`."""
    gen = as_generator(rng)
    u = np.asarray(u, dtype=float)
    s = gen.binomial(n, u, size=(draws, u.size)) / n
    g_u = weight_g(u)
    g_s = weight_g(s)
    up = (g_s >= g_u * (1 + delta)).mean()
    low = (g_s <= g_u * (1 - delta)).mean()
    return {
        "upper_freq": float(up),
        "upper_se": float(math.sqrt(up * (1 - up) / draws)),
        "lower_freq": float(low),
        "lower_se": float(math.sqrt(low * (1 - low) / draws)),
    }


class RecipMethod(str, Enum):
    ENUMERATE = "enumerate"
    INTEGRAL = "integral"


@lru_cache(maxsize=None)
def gauss_legendre_panels(breaks: tuple[float, ...], order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Gauss-Legendre on consecutive ``breaks``."""
    x, w = leggauss(order)
    b = np.asarray(breaks, dtype=float)
    lo, hi = b[:-1, None], b[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (x[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


# s = exp(-y): panels in y, geometrically graded towards y = 0 (s = 1) on
# [0, log 1000] and covering the s < 1e-3 region [log 1000, 45] separately.
_Y_SPLIT = math.log(1e3)
_RECIP_BREAKS = tuple(
    [0.0]
    + [_Y_SPLIT * (2.0**k - 1) / (2.0**12 - 1) for k in range(1, 13)]
    + [_Y_SPLIT + (45.0 - _Y_SPLIT) * k / 4 for k in range(1, 5)]
)


def recip_binom_expect(spec: BinomialSpec, method: RecipMethod | str = RecipMethod.ENUMERATE) -> float:
    """``E[1{S >= 1} / S]`` for ``S ~ Bin(n, u)``.

    ``"enumerate"`` sums ``P(S = k) / k``; ``"integral"`` evaluates
    ``n u ∫_0^1 (1 - u + u s)^(n-1) (-log s) ds`` with 256-node composite
    Gauss-Legendre after the substitution ``s = exp(-y)``, which removes the
    logarithmic singularity at ``s = 0``.
    """
    method = RecipMethod(method)
    n, u = spec.n, spec.u
    if method is RecipMethod.ENUMERATE:
        k = np.arange(1, n + 1, dtype=float)
        return float(np.sum(binom_pmf(k, n, u) / k))
    y, w = gauss_legendre_panels(_RECIP_BREAKS, 16)
    s = np.exp(-y)
    integrand = np.exp((n - 1) * np.log1p(-u * (1.0 - s))) * y * s
    return float(n * u * np.dot(w, integrand))


def verify_recip_binom_rate(
    c: float = 0.5,
    exponents: range = range(4, 13),
    grid_size: int = 129,
) -> dict:
    """Check that ``n M(n)`` stays bounded, where
    ``M(n) = sup_{u in [n^-c, 1]} |n u^2 E[1{S>=1}/S] - u|``.

    The supremum is taken over ``grid_size`` log-spaced points. Passes when
    consecutive ratios of ``n M(n)`` stay within [0.2, 5].
    """
    if not 0.0 < c < 1.0:
        raise DomainError("the exponent c must lie in (0, 1)")
    ns, scaled = [], []
    for e in exponents:
        n = 2**e
        us = np.geomspace(n**-c, 1.0, grid_size)
        k = np.arange(1, n + 1, dtype=float)
        expect = (binom_pmf(k[:, None], n, us[None, :]) / k[:, None]).sum(axis=0)
        dev = np.abs(n * us**2 * expect - us)
        ns.append(n)
        scaled.append(float(n * dev.max()))
    ratios = [b / a if a > 0 else math.inf for a, b in zip(scaled, scaled[1:])]
    ok = all(0.2 <= q <= 5.0 for q in ratios) and all(math.isfinite(v) for v in scaled)
    return {
        "check": "recip-binom",
        "c": c,
        "n": ns,
        "n_times_sup_error": scaled,
        "ratios": ratios,
        "passed": bool(ok),
    }

