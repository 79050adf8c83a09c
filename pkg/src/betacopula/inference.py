"""Weighted Cramér-von Mises independence test and CFG-type Pickands estimators.

The test statistic is

    T_{n,gamma} = n ∫ (C_n^beta(u) - C_0(u))^2 / g(u)^gamma du,   0 <= gamma < 2,

calibrated by Monte Carlo under independence. Because ranks of an iid
uniform sample are independent uniform permutations, the null law depends
only on ``(n, d, gamma)`` and one table serves any number of data sets.

The Pickands estimators integrate a copula estimate along the curves
``w -> (exp(-w t_1), ..., exp(-w t_d))``:

    log A(t) = -euler_gamma - ∫_0^inf {C(e^{-w t}) - 1{w <= 1}} dw / w.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import qmc
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import (
    RankMatrix,
    RngStream,
    TiePolicy,
    as_stream,
    check_sample,
    compute_ranks,
    map_replicates,
    sample_simplex_uniform,
    simplex_to_weights,
    weight_g,
)
from .estimators import _rank_factors, beta_copula_on_grid
from .exceptions import DimensionError, DomainError, GammaError, QuadratureError
from .models import CopulaModel, IndependenceCopula
from .special import beta_cdf_table, gauss_legendre_panels

EULER_MASCHERONI = 0.5772156649015329


class CubeRule(str, Enum):
    AUTO = "auto"
    MIDPOINT = "midpoint"
    MONTE_CARLO = "montecarlo"


@dataclass(frozen=True)
class QuadratureSpec:
    """Deterministic integration settings.

    Cube rule for ``T_{n,gamma}``: ``grid_m`` midpoint nodes per axis (odd,
    no node touches the boundary) in the graded variable ``s`` with
    ``u = s^p / (s^p + (1 - s)^p)``, ``p = grid_grading``; or ``mc_nodes``
    scrambled Sobol points drawn from stream ``mc_seed``
    (``mc_sequence="random"`` gives plain Monte Carlo nodes).

    Line rule for the Pickands integral: graded Gauss-Legendre panels
    truncated at ``w_truncation`` (default ``40 d``).
    """

    cube_rule: CubeRule = CubeRule.AUTO
    grid_m: int = 101
    grid_grading: float = 2.0
    mc_nodes: int = 2**14
    mc_sequence: str = "sobol"
    mc_seed: int = 20180806
    line_levels: int = 24
    line_order: int = 10
    line_resolution: float = 8.0
    w_truncation: float | None = None
    check_refinement: bool = True
    refinement_tol: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "cube_rule", CubeRule(self.cube_rule))
        if self.grid_m < 1 or self.grid_m % 2 == 0:
            raise DomainError(f"grid_m must be a positive odd integer, got {self.grid_m}")
        if self.grid_grading < 1:
            raise DomainError(f"grid_grading must be at least 1, got {self.grid_grading}")
        if self.mc_nodes < 2**12:
            raise DomainError(f"mc_nodes must be at least 4096, got {self.mc_nodes}")
        if self.mc_sequence not in ("sobol", "random"):
            raise DomainError(f"mc_sequence must be 'sobol' or 'random', got {self.mc_sequence!r}")
        if self.mc_sequence == "sobol" and self.mc_nodes & (self.mc_nodes - 1):
            raise DomainError(f"Sobol node counts must be powers of two, got {self.mc_nodes}")
        if self.line_levels < 1 or self.line_order < 2 or self.line_resolution <= 0:
            raise DomainError("line rule needs at least one level, order >= 2 and positive resolution")

    def rule_for(self, d: int) -> CubeRule:
        if self.cube_rule is CubeRule.AUTO:
            return CubeRule.MIDPOINT if d == 2 else CubeRule.MONTE_CARLO
        return self.cube_rule

    def truncation(self, d: int) -> float:
        w = 40.0 * d if self.w_truncation is None else float(self.w_truncation)
        if w < 40.0 * d:
            raise DomainError(f"w_truncation must be at least 40 d = {40 * d}")
        return w

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


DEFAULT_QUAD = QuadratureSpec()


def _check_gamma(gamma: float):
    if not 0.0 <= gamma < 2.0:
        raise GammaError(f"gamma must lie in [0, 2), got {gamma}")


# --- weighted Cramér-von Mises statistic ---------------------------------------


def graded_midpoints(m: int, p: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint nodes and weights on [0, 1] after the sigmoidal change of
    variable ``u = s^p / (s^p + (1 - s)^p)``, which clusters nodes near both
    ends. ``p = 1`` is the plain midpoint rule."""
    s = (np.arange(m) + 0.5) / m
    if p == 1:
        return s, np.full(m, 1.0 / m)
    a, b = s**p, (1.0 - s) ** p
    u = a / (a + b)
    jac = p * (s * (1.0 - s)) ** (p - 1.0) / (a + b) ** 2
    return u, jac / m


class CvMKernel:
    """Precomputed nodes, weights and null copula values for ``T_{n,gamma}``.

    Evaluates the statistic for several ``gamma`` at once on shared nodes.
    """

    def __init__(self, n: int, d: int, gammas: Sequence[float], quad: QuadratureSpec = DEFAULT_QUAD,
                 c0: CopulaModel | None = None):
        if d < 2:
            raise DimensionError("d must be at least 2")
        for g in gammas:
            _check_gamma(g)
        self.n, self.d = n, d
        self.gammas = tuple(float(g) for g in gammas)
        self.quad = quad
        self.rule = quad.rule_for(d)
        c0 = c0 if c0 is not None else IndependenceCopula(d)
        if self.rule is CubeRule.MIDPOINT:
            self.axis, axis_w = graded_midpoints(quad.grid_m, quad.grid_grading)
            self.table = beta_cdf_table(n, self.axis)
            mesh = np.stack(np.meshgrid(*([self.axis] * d), indexing="ij"), axis=-1)
            nodes = mesh.reshape(-1, d)
            cell = np.prod(np.stack(np.meshgrid(*([axis_w] * d), indexing="ij"), axis=-1), axis=-1).reshape(-1)
        else:
            gen = RngStream(quad.mc_seed).named("cube").generator()
            if quad.mc_sequence == "sobol":
                scramble_seed = int(gen.integers(2**63))
                nodes = qmc.Sobol(d, scramble=True, seed=scramble_seed).random(quad.mc_nodes)
            else:
                nodes = gen.random((quad.mc_nodes, d))
            self.tables = [beta_cdf_table(n, nodes[:, j]) for j in range(d)]
            cell = np.full(len(nodes), 1.0 / quad.mc_nodes)
        self.nodes = nodes
        self.c0 = np.asarray(c0.cdf(nodes), dtype=float)
        g = weight_g(nodes)
        # one weight row per gamma; g <= 1 so weights grow with gamma
        self.weights = np.stack([cell * g ** (-gam) for gam in self.gammas])

    def beta_values(self, ranks: RankMatrix) -> np.ndarray:
        if ranks.n != self.n or ranks.d != self.d:
            raise DimensionError(f"kernel built for n={self.n}, d={self.d}")
        if self.rule is CubeRule.MIDPOINT and self.d == 2:
            f1, f2 = self.table[ranks.ranks[:, 0] - 1], self.table[ranks.ranks[:, 1] - 1]
            return (f1.T @ f2).reshape(-1) / self.n
        if self.rule is CubeRule.MIDPOINT:
            return beta_copula_on_grid(ranks, self.axis).reshape(-1)
        prod = self.tables[0][ranks.ranks[:, 0] - 1]
        for j in range(1, self.d):
            prod = prod * self.tables[j][ranks.ranks[:, j] - 1]
        return prod.mean(axis=0)

    def statistics(self, ranks: RankMatrix) -> np.ndarray:
        """``T_{n,gamma}`` for every configured gamma."""
        sq = (self.beta_values(ranks) - self.c0) ** 2
        return self.n * (self.weights @ sq)


@lru_cache(maxsize=32)
def _kernel(n: int, d: int, gammas: tuple[float, ...], quad: QuadratureSpec) -> CvMKernel:
    return CvMKernel(n, d, gammas, quad)


def cvm_statistic(ranks: RankMatrix, gamma: float, c0: CopulaModel | None = None,
                  quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Weighted Cramér-von Mises distance between ``C_n^beta`` and ``c0`` (default: independence)."""
    _check_gamma(gamma)
    if c0 is None or isinstance(c0, IndependenceCopula):
        kernel = _kernel(ranks.n, ranks.d, (float(gamma),), quad)
    else:
        kernel = CvMKernel(ranks.n, ranks.d, (gamma,), quad, c0)
    return float(kernel.statistics(ranks)[0])


def _uniform_ranks(n: int, d: int, stream: RngStream) -> RankMatrix:
    u = stream.generator().random((n, d))
    return compute_ranks(u, TiePolicy.STABLE)


def null_statistics(n: int, d: int, gammas: Sequence[float], B: int, quad: QuadratureSpec,
                    rng: RngStream, threads: int = 1) -> np.ndarray:
    """``B x len(gammas)`` null statistics from iid uniform samples (unsorted, replicate order)."""
    kernel = _kernel(n, d, tuple(float(g) for g in gammas), quad)
    rows = map_replicates(lambda i, s: kernel.statistics(_uniform_ranks(n, d, s)), B, rng, threads)
    return np.asarray(rows)


def null_distribution(n: int, d: int, gamma: float, B: int, quad: QuadratureSpec = DEFAULT_QUAD,
                      rng: RngStream | int = 0, threads: int = 1) -> np.ndarray:
    """Sorted Monte Carlo null distribution of ``T_{n,gamma}`` under independence."""
    if B < 100:
        raise ValueError("B must be at least 100")
    _check_gamma(gamma)
    stats = null_statistics(n, d, [gamma], B, quad, as_stream(rng), threads)[:, 0]
    return np.sort(stats)


def critical_value(null_sorted: np.ndarray, alpha_level: float) -> float:
    """The ``ceil((1 - alpha)(B + 1))``-th order statistic (``inf`` when that exceeds ``B``)."""
    B = len(null_sorted)
    k = math.ceil((1.0 - alpha_level) * (B + 1) - 1e-9)
    return float(null_sorted[k - 1]) if k <= B else math.inf


def p_value(statistic: float, null_sorted: np.ndarray) -> float:
    """``(1 + #{null >= statistic}) / (B + 1)``."""
    B = len(null_sorted)
    exceed = B - np.searchsorted(null_sorted, statistic, side="left")
    return (1.0 + exceed) / (B + 1.0)


@dataclass
class TestReport:
    statistic: float
    gamma: float
    p_value: float
    critical_value: float
    alpha_level: float
    B: int
    n: int
    d: int
    seed: int
    stream_id: int
    quad: str

    __test__ = False  # keep pytest from collecting this class

    @property
    def reject(self) -> bool:
        return self.statistic > self.critical_value

    def to_dict(self) -> dict:
        out = asdict(self)
        out["reject"] = self.reject
        if math.isinf(out["critical_value"]):
            out["critical_value"] = None
        return out

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _check_level(alpha_level: float):
    if not 0.0 < alpha_level < 1.0:
        raise DomainError(f"significance level must lie in (0, 1), got {alpha_level}")


def independence_test(sample, gamma: float, B: int = 1000, alpha_level: float = 0.05,
                      quad: QuadratureSpec = DEFAULT_QUAD, rng: RngStream | int = 0,
                      null_sorted: np.ndarray | None = None, threads: int = 1) -> TestReport:
    """Rank the sample, compute ``T_{n,gamma}`` and compare with the null table."""
    _check_gamma(gamma)
    _check_level(alpha_level)
    if B < 100:
        raise ValueError("B must be at least 100")
    ranks = sample if isinstance(sample, RankMatrix) else compute_ranks(sample, TiePolicy.ERROR)
    rng = as_stream(rng)
    stat = cvm_statistic(ranks, gamma, quad=quad)
    if null_sorted is None:
        null_sorted = null_distribution(ranks.n, ranks.d, gamma, B, quad, rng.named("null"), threads)
    return TestReport(
        statistic=stat,
        gamma=float(gamma),
        p_value=float(p_value(stat, null_sorted)),
        critical_value=critical_value(null_sorted, alpha_level),
        alpha_level=alpha_level,
        B=len(null_sorted),
        n=ranks.n,
        d=ranks.d,
        seed=rng.master_seed,
        stream_id=rng.stream_id,
        quad=quad.digest(),
    )


@dataclass
class PowerRow:
    n: int
    gamma: float
    power: float
    mc_se: float
    reps: int
    seed: int


def power_sweep(model: CopulaModel, n: int, gammas: Sequence[float], reps: int, B: int,
                alpha_level: float = 0.05, rng: RngStream | int = 0,
                quad: QuadratureSpec = DEFAULT_QUAD, threads: int = 1,
                recalibrate: bool = False) -> list[PowerRow]:
    """Rejection rates of the test for several ``gamma`` on shared data sets.

    The null table is computed once per ``(n, d)`` and reused by every
    replicate; ``recalibrate=True`` draws a fresh table per replicate
    instead (slow, for auditing).
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    _check_level(alpha_level)
    if B < 100:
        raise ValueError("B must be at least 100")
    rng = as_stream(rng)
    gammas = tuple(float(g) for g in gammas)
    d = model.d
    kernel = _kernel(n, d, gammas, quad)
    null_rng = rng.named("null")

    def crit_from(null_stats: np.ndarray) -> np.ndarray:
        return np.array([critical_value(np.sort(null_stats[:, k]), alpha_level) for k in range(len(gammas))])

    crit = None if recalibrate else crit_from(null_statistics(n, d, gammas, B, quad, null_rng, threads))
    data_rng = rng.named("data")

    def one(i: int, stream: RngStream) -> np.ndarray:
        x = model.sample(n, stream.generator())
        stats = kernel.statistics(compute_ranks(x, TiePolicy.STABLE))
        c = crit if crit is not None else crit_from(null_statistics(n, d, gammas, B, quad, null_rng.child(i)))
        return stats > c

    hits = np.asarray(map_replicates(one, reps, data_rng, threads))
    rows = []
    for k, g in enumerate(gammas):
        p = float(hits[:, k].mean())
        rows.append(PowerRow(n, g, p, math.sqrt(p * (1 - p) / reps), reps, rng.master_seed))
    return rows


def power_study(model: CopulaModel, n: int, gamma: float, reps: int, B: int,
                alpha_level: float = 0.05, rng: RngStream | int = 0,
                quad: QuadratureSpec = DEFAULT_QUAD, threads: int = 1) -> tuple[float, float]:
    """``(power, mc_se)`` of the level-``alpha`` test against ``model``."""
    if reps < 100:
        raise ValueError("reps must be at least 100")
    _check_gamma(gamma)
    row = power_sweep(model, n, [gamma], reps, B, alpha_level, rng, quad, threads)[0]
    return row.power, row.mc_se


# --- Pickands dependence function ----------------------------------------------


class Variant(str, Enum):
    CFG = "cfg"
    BETA = "beta"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        text = str(value).lower().replace("_", "").replace("-", "")
        aliases = {"empirical": cls.CFG, "cfg": cls.CFG, "cfgcorrected": cls.CFG, "corrected": cls.CFG,
                   "beta": cls.BETA, "betacfg": cls.BETA}
        if text not in aliases:
            raise ValueError(f"unknown Pickands variant {value!r}")
        return aliases[text]


_X_STAR = 1.5936242600400401  # minimiser of (e^x - 1) / x^2


def _smoothing_scale(w: float, n: int) -> float:
    """Lower bound, over all weights t in (0, 1], on the binomial smoothing
    scale of ``C_n^beta(e^{-w t})`` measured in ``w``.

    The kernel of ``F_{n,r}`` at ``u`` has spread ``sqrt(u(1-u)/n)``; in
    ``w`` this is ``sqrt((e^{wt} - 1)/n) / t`` for the coordinate with weight t.
    """
    x = min(w, _X_STAR)
    return w * math.sqrt(math.expm1(x) / (x * x) / n)


def _line_breaks(levels: int, truncation: float, n: int | None = None, resolution: float = 8.0,
                 split: int = 1) -> tuple[float, ...]:
    """Panels on [0, W]: dyadic towards 0 on [0, 1], doubling lengths on [1, W].

    With ``n`` given, every panel is cut into pieces no wider than
    ``resolution`` times the smoothing scale at its left end.
    """
    inner = [0.0] + [2.0 ** (-k) for k in range(levels, 0, -1)] + [1.0]
    outer = [1.0]
    while outer[-1] * 2.0 < truncation:
        outer.append(outer[-1] * 2.0)
    outer.append(truncation)
    base = inner + outer[1:]
    breaks = []
    for lo, hi in zip(base[:-1], base[1:]):
        pieces = split
        if n is not None and lo > 0:
            pieces *= max(1, math.ceil((hi - lo) / (resolution * _smoothing_scale(lo, n))))
        breaks.extend(lo + (hi - lo) * k / pieces for k in range(pieces))
    return tuple(breaks + [base[-1]])


def _line_rule(quad: QuadratureSpec, d: int, n: int | None, split: int) -> tuple[np.ndarray, np.ndarray]:
    breaks = _line_breaks(quad.line_levels, quad.truncation(d), n, quad.line_resolution, split)
    return gauss_legendre_panels(breaks, quad.line_order)


def _as_simplex(t, d: int) -> np.ndarray:
    """Simplex points as an ``(m, d)`` weight array (last column implied)."""
    t = np.asarray(t, dtype=float)
    if d == 2 and (t.ndim == 0 or (t.ndim == 1 and t.shape[-1] != 1)):
        t = t.reshape(-1, 1)
    t = np.atleast_2d(t)
    if t.shape[-1] != d - 1:
        raise DimensionError(f"simplex points need {d - 1} coordinates")
    return simplex_to_weights(t)


def _log_integral(cdf_at, weights: np.ndarray, quad: QuadratureSpec, n: int | None = None,
                  chunk: int = 2048) -> np.ndarray:
    """``-gamma_E - ∫ {C(e^{-w t}) - 1{w<=1}} dw/w`` for each row of simplex weights.

    ``n`` is the sample size behind ``cdf_at`` (``None`` for smooth CDFs).
    """
    d = weights.shape[1]

    def level(split: int) -> np.ndarray:
        w, wt = _line_rule(quad, d, n, split)
        out = np.empty(len(weights))
        rows = max(1, chunk // len(w))
        for s in range(0, len(weights), rows):
            wts = weights[s:s + rows]
            pts = np.exp(-w[None, :, None] * wts[:, None, :])  # (m, K, d)
            c = np.asarray(cdf_at(pts.reshape(-1, d)), dtype=float).reshape(len(wts), len(w))
            f = (c - (w <= 1.0)) / w
            out[s:s + rows] = -EULER_MASCHERONI - f @ wt
        return out

    coarse = level(1)
    if not quad.check_refinement:
        return coarse
    fine = level(2)
    gap = np.max(np.abs(fine - coarse))
    if gap > quad.refinement_tol:
        raise QuadratureError(f"Pickands integral refinement changed the result by {gap:.2e}")
    return fine


def cfg_log_integral(cdf, t, d: int = 2, quad: QuadratureSpec = DEFAULT_QUAD):
    """The CFG log-integral applied to any copula CDF (vectorised callable)."""
    weights = _as_simplex(t, d)
    out = _log_integral(cdf, weights, quad)
    return float(out[0]) if np.ndim(t) <= (0 if d == 2 else 1) else out


def _cfg_empirical_log(ranks: RankMatrix, weights: np.ndarray) -> np.ndarray:
    """Closed form of the log-integral with the empirical copula of ``R / (n + 1)``.

    ``-gamma_E - mean_i log min_j (-log U_ij / t_j)``.
    """
    neg_log_u = -np.log(ranks.ranks / (ranks.n + 1.0))  # (n, d)
    with np.errstate(divide="ignore"):
        ratios = neg_log_u[None, :, :] / weights[:, None, :]  # (m, n, d); t_j = 0 gives inf
    xi = ratios.min(axis=2)
    return -EULER_MASCHERONI - np.log(xi).mean(axis=1)


def _cfg_beta_log(ranks: RankMatrix, weights: np.ndarray, quad: QuadratureSpec) -> np.ndarray:
    def cdf_at(pts):
        out = np.empty(len(pts))
        for s in range(0, len(pts), 512):
            factors = _rank_factors(ranks, pts[s:s + 512])
            prod = factors[0]
            for f in factors[1:]:
                prod *= f
            out[s:s + 512] = prod.mean(axis=0)
        return out

    return _log_integral(cdf_at, weights, quad, ranks.n)


def cfg_log_estimate(ranks: RankMatrix, t, variant="beta", quad: QuadratureSpec = DEFAULT_QUAD):
    """Uncorrected log-Pickands estimate at simplex point(s) ``t``.

    ``variant="beta"`` integrates the empirical beta copula numerically;
    ``variant="cfg"`` (alias ``"empirical"``) is the classical rank-based
    CFG estimator, computed in closed form.
    """
    variant = Variant.parse(variant)
    weights = _as_simplex(t, ranks.d)
    if variant is Variant.BETA:
        out = _cfg_beta_log(ranks, weights, quad)
    else:
        out = _cfg_empirical_log(ranks, weights)
    return float(out[0]) if np.ndim(t) <= (0 if ranks.d == 2 else 1) else out


def _vertices(d: int) -> np.ndarray:
    return np.eye(d)


def _corrected_from_log(log_a: np.ndarray, log_vertices: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.exp(log_a - weights @ log_vertices)


def cfg_endpoint_corrected(ranks: RankMatrix, t, quad: QuadratureSpec = DEFAULT_QUAD):
    """Endpoint-corrected CFG estimate ``A(t) / prod_j A(e_j)^{t_j}``; equals 1 at every vertex."""
    weights = _as_simplex(t, ranks.d)
    log_a = _cfg_empirical_log(ranks, weights)
    log_v = _cfg_empirical_log(ranks, _vertices(ranks.d))
    out = _corrected_from_log(log_a, log_v, weights)
    # exact 1 at vertices regardless of rounding in the weighted sum
    out[weights.max(axis=1) == 1.0] = 1.0
    return float(out[0]) if np.ndim(t) <= (0 if ranks.d == 2 else 1) else out


def pickands_estimate(ranks: RankMatrix, t, variant="beta", quad: QuadratureSpec = DEFAULT_QUAD):
    """Pickands estimate: beta variant as is, CFG variant endpoint-corrected."""
    variant = Variant.parse(variant)
    if variant is Variant.BETA:
        out = np.exp(np.atleast_1d(cfg_log_estimate(ranks, t, variant, quad)))
        # C_n^beta has exactly uniform margins, so A = 1 at the vertices
        out[_as_simplex(t, ranks.d).max(axis=1) == 1.0] = 1.0
        return float(out[0]) if np.ndim(t) <= (0 if ranks.d == 2 else 1) else out
    return cfg_endpoint_corrected(ranks, t, quad)


def simplex_grid(d: int, grid_size: int) -> np.ndarray:
    """``grid_size`` points on [0, 1] for ``d = 2``; a triangular lattice with
    ``grid_size`` points per edge for ``d = 3``."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    if d == 2:
        return np.linspace(0.0, 1.0, grid_size)[:, None]
    if d == 3:
        k = grid_size - 1
        return np.array([(i / k, j / k) for i in range(k + 1) for j in range(k + 1 - i)])
    raise DimensionError("curves are available for d in {2, 3}")


@dataclass
class PickandsCurve:
    t_grid: np.ndarray
    estimates: np.ndarray
    variant: Variant

    def rows(self) -> Iterable[tuple]:
        for t, a in zip(self.t_grid, self.estimates):
            yield (*map(float, t), float(a))


def pickands_curve(ranks: RankMatrix, grid_size: int = 101, variant="beta",
                   quad: QuadratureSpec = DEFAULT_QUAD) -> PickandsCurve:
    """Estimates over a regular simplex grid (see :func:`simplex_grid`)."""
    variant = Variant.parse(variant)
    grid = simplex_grid(ranks.d, grid_size)
    est = np.atleast_1d(pickands_estimate(ranks, grid, variant, quad))
    return PickandsCurve(grid, est, variant)


def imse_study(model: CopulaModel, n: int, M: int, variant="beta", quad: QuadratureSpec = DEFAULT_QUAD,
               rng: RngStream | int = 0, threads: int = 1) -> tuple[float, float]:
    """Monte Carlo integrated squared error ``mean_m (Â_m(T_m) - A(T_m))^2``.

    Replicate ``m`` draws a fresh sample and an independent uniform simplex
    point from its own stream, so two variants run with the same ``rng``
    see identical data.
    """
    if M < 100:
        raise ValueError("M must be at least 100")
    if not model.is_extreme_value:
        raise DomainError("IMSE needs a model with a Pickands dependence function")
    variant = Variant.parse(variant)
    rng = as_stream(rng)

    def one(i: int, stream: RngStream) -> float:
        x = model.sample(n, stream.named("sample").generator())
        t = sample_simplex_uniform(stream.named("point"), model.d)
        ranks = compute_ranks(x, TiePolicy.STABLE)
        t_arg = t[0] if model.d == 2 else t
        est = pickands_estimate(ranks, t_arg, variant, quad)
        return (est - float(model.pickands(t_arg))) ** 2

    errs = np.asarray(map_replicates(one, M, rng, threads))
    return float(errs.mean()), float(errs.std(ddof=1) / math.sqrt(M))


# --- estimator API --------------------------------------------------------------


class WeightedCvMIndependenceTest(BaseEstimator):
    """Weighted Cramér-von Mises test of independence based on the empirical beta copula.

    Parameters
    ----------
    gamma : float
        Weight exponent in [0, 2); larger values stress the boundary.
    n_null : int
        Number of Monte Carlo null replicates.
    alpha : float
        Significance level.
    grid_m, mc_nodes : int
        Cube quadrature (midpoint for d = 2, Monte Carlo otherwise).
    seed : int
        Master seed of the calibration stream.
    """

    def __init__(self, gamma=1.0, n_null=1000, alpha=0.05, grid_m=101, mc_nodes=2**14, seed=0, threads=1):
        self.gamma = gamma
        self.n_null = n_null
        self.alpha = alpha
        self.grid_m = grid_m
        self.mc_nodes = mc_nodes
        self.seed = seed
        self.threads = threads

    def fit(self, X, y=None):
        X = check_sample(X)
        quad = QuadratureSpec(grid_m=self.grid_m, mc_nodes=self.mc_nodes)
        self.report_ = independence_test(
            X, self.gamma, self.n_null, self.alpha, quad, RngStream(self.seed), threads=self.threads
        )
        self.statistic_ = self.report_.statistic
        self.pvalue_ = self.report_.p_value
        self.critical_value_ = self.report_.critical_value
        self.reject_ = self.report_.reject
        self.n_features_in_ = X.shape[1]
        return self


class PickandsEstimator(BaseEstimator):
    """Rank-based estimator of a Pickands dependence function.

    ``variant="beta"`` uses the empirical beta copula; ``variant="cfg"`` is
    the endpoint-corrected CFG estimator.
    """

    def __init__(self, variant="beta", line_levels=24, line_order=10, check_refinement=True):
        self.variant = variant
        self.line_levels = line_levels
        self.line_order = line_order
        self.check_refinement = check_refinement

    def fit(self, X, y=None):
        X = check_sample(X)
        self.ranks_ = compute_ranks(X, TiePolicy.ERROR)
        self.quad_ = QuadratureSpec(line_levels=self.line_levels, line_order=self.line_order,
                                    check_refinement=self.check_refinement)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, T):
        """Estimates at simplex points ``T`` (shape ``(m,)`` for d = 2, ``(m, d - 1)`` otherwise)."""
        check_is_fitted(self, "ranks_")
        T = np.asarray(T, dtype=float)
        if self.n_features_in_ == 2:
            T = T.reshape(-1)
        return np.atleast_1d(pickands_estimate(self.ranks_, T, self.variant, self.quad_))

    def curve(self, grid_size=101) -> PickandsCurve:
        check_is_fitted(self, "ranks_")
        return pickands_curve(self.ranks_, grid_size, self.variant, self.quad_)
