"""Empirical copula and empirical beta copula.

The empirical beta copula replaces each indicator of the empirical copula by
a product of beta order-statistic CDFs,

    C_n^beta(u) = (1/n) sum_i prod_j F_{n, R_ij}(u_j),

and is a genuine copula when there are no ties. Evaluation goes through
:func:`~betacopula.special.beta_cdf_table`, computing ``F_{n,r}(v)`` for all
ranks ``r`` at each distinct coordinate value once.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import (
    RankMatrix,
    TiePolicy,
    as_generator,
    check_sample,
    compute_ranks,
    pseudo_observations,
    weight_g,
)
from .exceptions import DimensionError, DomainError, OmegaError, RegionEmpty
from .special import beta_cdf_table

_CHUNK = 1 << 22


def _as_points(u, d: int) -> tuple[np.ndarray, bool]:
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    if u.shape[-1] != d:
        raise DimensionError(f"points have {u.shape[-1]} coordinates, expected {d}")
    if np.any((u < 0) | (u > 1)) or not np.all(np.isfinite(u)):
        raise DomainError("evaluation points must lie in [0, 1]^d")
    return u, single


def _ret(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def empirical_copula(ranks: RankMatrix, u):
    """Empirical copula ``(1/n) #{i : R_i / n <= u}`` at one point or a batch."""
    u, single = _as_points(u, ranks.d)
    pseudo = pseudo_observations(ranks)
    rows = max(1, _CHUNK // (ranks.n * ranks.d))
    out = np.empty(len(u))
    for start in range(0, len(u), rows):
        block = u[start : start + rows]
        inside = np.all(pseudo[None, :, :] <= block[:, None, :], axis=-1)
        out[start : start + rows] = inside.mean(axis=1)
    return _ret(out, single)


def _rank_factors(ranks: RankMatrix, u: np.ndarray) -> list[np.ndarray]:
    """Per column j, the ``n x m`` matrix ``F_{n, R_ij}(u_kj)``."""
    factors = []
    for j in range(ranks.d):
        values, inverse = np.unique(u[:, j], return_inverse=True)
        table = beta_cdf_table(ranks.n, values)
        factors.append(table[ranks.ranks[:, j] - 1][:, inverse])
    return factors


def _warn_ties(ranks: RankMatrix):
    if ranks.has_ties:
        warnings.warn(
            "ranks contain ties; the empirical beta copula is then not guaranteed to be a copula",
            RuntimeWarning,
            stacklevel=3,
        )


def empirical_beta_copula(ranks: RankMatrix, u):
    """Empirical beta copula at one point or a batch of points."""
    _warn_ties(ranks)
    u, single = _as_points(u, ranks.d)
    cols = max(1, _CHUNK // (ranks.n * ranks.d))
    out = np.empty(len(u))
    for start in range(0, len(u), cols):
        factors = _rank_factors(ranks, u[start : start + cols])
        if len(factors) > 2:
            # multiply in sorted order so permuting the columns gives identical bits
            factors = list(np.sort(np.stack(factors), axis=0))
        prod = factors[0]
        for f in factors[1:]:
            prod = prod * f
        out[start : start + cols] = prod.mean(axis=0)
    return _ret(out, single)


def beta_copula_on_grid(ranks: RankMatrix, axes: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
    """Empirical beta copula on the tensor grid ``axes[0] x ... x axes[d-1]``.

    A single 1-D array is used for every axis. Returns an array of shape
    ``(len(axes[0]), ..., len(axes[d-1]))``.
    """
    _warn_ties(ranks)
    d = ranks.d
    if isinstance(axes, np.ndarray) and axes.ndim == 1:
        axes = [axes] * d
    if len(axes) != d:
        raise DimensionError(f"need {d} grid axes, got {len(axes)}")
    factors = [beta_cdf_table(ranks.n, ax)[ranks.ranks[:, j] - 1] for j, ax in enumerate(axes)]
    if d == 2:
        return factors[0].T @ factors[1] / ranks.n
    letters = "abcdefghijklmnopqrstuvwxyz"[:d]
    expr = ",".join(f"i{c}" for c in letters) + "->" + letters
    return np.einsum(expr, *factors, optimize=True) / ranks.n


@dataclass
class GridEvaluation:
    points: np.ndarray
    values: np.ndarray
    estimator_tag: str

    def __post_init__(self):
        if len(self.points) != len(self.values):
            raise ValueError("points and values differ in length")

    def to_csv(self, path_or_buf):
        d = self.points.shape[1]
        own = isinstance(path_or_buf, str)
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"u{j + 1}" for j in range(d)] + [self.estimator_tag.lower()])
            for p, v in zip(self.points, self.values):
                writer.writerow([repr(float(x)) for x in p] + [repr(float(v))])
        finally:
            if own:
                fh.close()


def evaluate_grid(ranks: RankMatrix, m: int, estimator: str = "beta") -> GridEvaluation:
    """Evaluate either estimator on the midpoint grid with ``m`` nodes per axis."""
    axis = (np.arange(m) + 0.5) / m
    mesh = np.stack(np.meshgrid(*([axis] * ranks.d), indexing="ij"), axis=-1).reshape(-1, ranks.d)
    if estimator.lower() == "beta":
        values = beta_copula_on_grid(ranks, axis).ravel()
        tag = "Beta"
    elif estimator.lower() == "empirical":
        values = empirical_copula(ranks, mesh)
        tag = "Empirical"
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return GridEvaluation(mesh, np.asarray(values), tag)


def _check_omega(omega: float):
    if not 0.0 <= omega < 0.5:
        raise OmegaError(f"omega must lie in [0, 1/2), got {omega}")


@dataclass(frozen=True)
class WeightedProcessValue:
    value: float
    omega: float
    at: tuple[float, ...]


def weighted_beta_process(ranks: RankMatrix, c_true, u, omega: float):
    """``sqrt(n) (C_n^beta(u) - C(u)) / g(u)^omega``, defined as 0 where ``g(u) = 0``.

    ``c_true`` is a :class:`~betacopula.models.CopulaModel` (anything with
    a vectorised ``cdf``). Returns a :class:`WeightedProcessValue` for a
    single point, or a plain array of values for a batch.
    """
    _check_omega(omega)
    pts, single = _as_points(u, ranks.d)
    g = weight_g(pts)
    diff = empirical_beta_copula(ranks, pts) - np.asarray(c_true.cdf(pts), dtype=float)
    values = np.zeros(len(pts))
    pos = g > 0
    values[pos] = math.sqrt(ranks.n) * diff[pos] / g[pos] ** omega
    if single:
        return WeightedProcessValue(float(values[0]), omega, tuple(float(x) for x in pts[0]))
    return values


@dataclass
class IdentityCheck:
    lhs: float
    rhs_estimate: float
    mc_se: float
    passed: bool = field(init=False)

    def __post_init__(self):
        gap = abs(self.lhs - self.rhs_estimate)
        self.passed = bool(gap <= 4.0 * self.mc_se or gap <= 1e-12)

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs_estimate": self.rhs_estimate, "mc_se": self.mc_se, "passed": self.passed}


def verify_smoothing_identity(ranks: RankMatrix, u, mc_draws: int, rng) -> IdentityCheck:
    """Compare ``C_n^beta(u)`` with a Monte Carlo average of ``Ĉ_n(S/n)``.

    ``S_j ~ Bin(n, u_j)`` independently; the two agree in expectation.
    """
    if mc_draws < 1000:
        raise ValueError("mc_draws must be at least 1000")
    u, _ = _as_points(u, ranks.d)
    u = u[0]
    gen = as_generator(rng)
    lhs = float(empirical_beta_copula(ranks, u))
    s = gen.binomial(ranks.n, u, size=(mc_draws, ranks.d))
    vals = np.empty(mc_draws)
    rows = max(1, _CHUNK // (ranks.n * ranks.d))
    for start in range(0, mc_draws, rows):
        block = s[start : start + rows]
        # R_ij / n <= S_j / n compared on integers
        inside = np.all(ranks.ranks[None, :, :] <= block[:, None, :], axis=-1)
        vals[start : start + rows] = inside.mean(axis=1)
    se = float(vals.std(ddof=1) / math.sqrt(mc_draws))
    return IdentityCheck(lhs, float(vals.mean()), se)


def boundary_envelope(n: int, d: int, omega: float, gamma_exp: float) -> float:
    """Deterministic bound ``2 (d - 1) n^(1/2 + gamma omega - gamma)`` on the boundary shell."""
    return 2.0 * (d - 1) * n ** (0.5 + gamma_exp * omega - gamma_exp)


def boundary_probes(n: int, d: int, gamma_exp: float, probe_count: int, rng) -> np.ndarray:
    """Random points of ``{g <= n^-gamma}``.

    Half of them pin one coordinate below the threshold; the other half push
    all coordinates but one to within the threshold of 1.
    """
    eps = float(n) ** (-gamma_exp)
    if not eps > 0.0 or probe_count < 1:
        raise RegionEmpty(f"boundary shell g <= {eps} is empty at this resolution")
    gen = as_generator(rng)
    u = gen.random((probe_count, d))
    j = gen.integers(0, d, size=probe_count)
    low_side = gen.random(probe_count) < 0.5
    shell = eps * gen.random((probe_count, d))
    rows = np.arange(probe_count)
    u[rows[low_side], j[low_side]] = shell[rows[low_side], j[low_side]]
    high = ~low_side
    mask = np.zeros((probe_count, d), dtype=bool)
    mask[high] = True
    mask[rows[high], j[high]] = False
    u[mask] = 1.0 - shell[mask]
    u = u[weight_g(u) <= eps]
    if len(u) == 0:
        raise RegionEmpty("no probe point landed in the boundary shell")
    return u


def verify_boundary_negligibility(
    ranks: RankMatrix, c_true, omega: float, gamma_exp: float, probe_count: int, rng
) -> float:
    """Largest ``|weighted_beta_process|`` over random probes of ``{g <= n^-gamma}``."""
    if not 0.0 < omega < 0.5:
        raise OmegaError(f"omega must lie in (0, 1/2), got {omega}")
    if not gamma_exp > 1.0 / (2.0 * (1.0 - omega)):
        raise DomainError("gamma_exp must exceed 1 / (2 (1 - omega))")
    probes = boundary_probes(ranks.n, ranks.d, gamma_exp, probe_count, rng)
    values = weighted_beta_process(ranks, c_true, probes, omega)
    return float(np.max(np.abs(values)))


class RankTransformer(TransformerMixin, BaseEstimator):
    """Map data to pseudo-observations through the fitted marginal ECDFs.

    On the training sample this gives exactly ``R / n``.
    """

    def __init__(self, ties="error"):
        self.ties = ties

    def fit(self, X, y=None):
        X = check_sample(X)
        self.ranks_ = compute_ranks(X, self.ties)
        self.sorted_ = np.sort(X, axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "sorted_")
        X = check_sample(X)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        n = self.sorted_.shape[0]
        cols = [np.searchsorted(self.sorted_[:, j], X[:, j], side="right") for j in range(X.shape[1])]
        return np.column_stack(cols) / n

    def fit_transform(self, X, y=None, **fit_params):
        return pseudo_observations(self.fit(X).ranks_)


class _RankCopulaEstimator(BaseEstimator):
    def __init__(self, ties="error"):
        self.ties = ties

    def fit(self, X, y=None):
        """Rank the sample ``X`` (rows are observations)."""
        X = check_sample(X)
        self.ranks_ = compute_ranks(X, TiePolicy(self.ties))
        self.n_samples_, self.n_features_in_ = X.shape
        return self

    def predict(self, U):
        """Copula estimate at the rows of ``U``."""
        check_is_fitted(self, "ranks_")
        return self._evaluate(np.atleast_2d(U))

    def _evaluate(self, U):
        raise NotImplementedError


class EmpiricalCopula(_RankCopulaEstimator):
    """Empirical copula estimator."""

    def _evaluate(self, U):
        return empirical_copula(self.ranks_, U)


class EmpiricalBetaCopula(_RankCopulaEstimator):
    """Empirical beta copula estimator.

    >>> import numpy as np
    >>> est = EmpiricalBetaCopula().fit(np.array([[0.1, 0.9], [0.8, 0.2]]))
    >>> round(float(est.predict([[0.5, 0.5]])[0]), 4)
    0.1875
    """

    def _evaluate(self, U):
        return empirical_beta_copula(self.ranks_, U)

    def predict_grid(self, m: int = 101) -> GridEvaluation:
        check_is_fitted(self, "ranks_")
        return evaluate_grid(self.ranks_, m, "beta")

    def weighted_process(self, U, copula, omega: float = 0.25):
        check_is_fitted(self, "ranks_")
        return weighted_beta_process(self.ranks_, copula, np.atleast_2d(U), omega)
