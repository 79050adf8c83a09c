"""Parametric copulas used as data-generating processes.

Pickands dependence functions take simplex points ``t = (t_1, ..., t_{d-1})``
where ``t_j`` is the share of ``log u_j`` in ``sum_k log u_k``; see
:func:`evc_cdf_from_pickands`.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Callable

import numpy as np
from scipy import integrate, stats

from .core import as_generator, simplex_to_weights
from .exceptions import DimensionError, DomainError


def _unit_points(u, d: int) -> tuple[np.ndarray, bool]:
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    if u.shape[-1] != d:
        raise DimensionError(f"expected {d} coordinates, got {u.shape[-1]}")
    return u, single


def _check_alpha(alpha: float):
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")


# --- Pickands dependence functions -------------------------------------------


def gumbel_pickands(t, alpha: float):
    """Logistic (Gumbel) Pickands function ``{t^(1/a) + (1-t)^(1/a)}^a``."""
    _check_alpha(alpha)
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise DomainError("t must lie in [0, 1]")
    hi = np.maximum(t, 1.0 - t)
    lo = np.minimum(t, 1.0 - t)
    out = hi * (1.0 + (lo / hi) ** (1.0 / alpha)) ** alpha
    return float(out) if out.ndim == 0 else out


def logistic_pickands(t, alpha: float):
    """Symmetric logistic Pickands function ``(sum_j t_j^(1/a))^a`` in any dimension."""
    _check_alpha(alpha)
    w = simplex_to_weights(t)
    hi = w.max(axis=-1)
    ratio = np.divide(w, hi[..., None], out=np.zeros_like(w), where=hi[..., None] > 0)
    out = hi * np.sum(ratio ** (1.0 / alpha), axis=-1) ** alpha
    return float(out) if out.ndim == 0 else out


def _check_asym(theta: float, phi: float, alpha: float):
    _check_alpha(alpha)
    if not (0.0 <= theta <= 1.0 and 0.0 <= phi <= 1.0):
        raise DomainError("theta and phi must lie in [0, 1]")
    if theta + phi > 1.0 + 1e-12:
        raise DomainError("theta + phi must not exceed 1")


_CYCLE = ((0, 1), (1, 2), (2, 0))


def asym_logistic_pickands(t, theta: float, phi: float, alpha: float):
    """Trivariate asymmetric logistic Pickands function.

    ``sum over (i, j) in {(1,2), (2,3), (3,1)}`` of
    ``{(theta t_i)^(1/a) + (phi t_j)^(1/a)}^a``, plus ``1 - theta - phi``.
    """
    _check_asym(theta, phi, alpha)
    w = simplex_to_weights(t)
    if w.shape[-1] != 3:
        raise DimensionError("asymmetric logistic model is trivariate")
    total = 1.0 - theta - phi
    for i, j in _CYCLE:
        x, y = theta * w[..., i], phi * w[..., j]
        hi = np.maximum(x, y)
        lo = np.minimum(x, y)
        ratio = np.divide(lo, hi, out=np.zeros_like(hi), where=hi > 0)
        total = total + hi * (1.0 + ratio ** (1.0 / alpha)) ** alpha
    return float(total) if np.ndim(total) == 0 else total


def moving_max_pickands(t, a: float, b: float, B: Callable):
    """Pickands function of the moving-maximum process in the parametrisation

    ``{a(1-t) + bt} B(bt / {a(1-t) + bt}) +
    {(1-a)(1-t) + (1-b)t} B((1-b)t / {(1-a)(1-t) + (1-b)t})``.

    Here ``t`` weighs the *second* coordinate; :class:`MovingMaximumCopula`
    converts to the first-coordinate convention used everywhere else.
    """
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        raise DomainError("a and b must lie in [0, 1]")
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for wa, wb in ((a, b), (1.0 - a, 1.0 - b)):
        weight = wa * (1.0 - t) + wb * t
        arg = np.divide(wb * t, weight, out=np.zeros_like(t), where=weight > 0)
        out = out + weight * np.asarray(B(np.clip(arg, 0.0, 1.0)))
    return float(out) if out.ndim == 0 else out


def evc_cdf_from_pickands(A: Callable, u):
    """Extreme-value copula ``exp{(sum_j log u_j) A(log u_1 / sum, ..., log u_{d-1} / sum)}``.

    Zero when a coordinate is zero, one at ``(1, ..., 1)``.
    """
    u = np.asarray(u, dtype=float)
    single = u.ndim == 1
    u = np.atleast_2d(u)
    out = np.ones(len(u))
    zero = np.any(u <= 0.0, axis=1)
    ones = np.all(u >= 1.0, axis=1)
    live = ~zero & ~ones
    if np.any(live):
        logs = np.log(u[live])
        total = logs.sum(axis=1)
        t = logs[:, :-1] / total[:, None]
        if u.shape[1] == 2:
            t = t[:, 0]
        a_val = np.asarray(A(t), dtype=float)
        prod = np.prod(u[live], axis=1)
        # prod ** A reproduces the independence copula bit for bit when A = 1;
        # the log form guards against underflow of the plain product
        out[live] = np.where(prod > 1e-290, prod**a_val, np.exp(total * a_val))
    out[zero] = 0.0
    return float(out[0]) if single else out


# --- samplers ------------------------------------------------------------------


def _log_positive_stable(alpha: float, size, gen: np.random.Generator) -> np.ndarray:
    """Log of a positive stable variate with Laplace transform ``exp(-s^alpha)``.

    Kanter's representation, evaluated in log space.
    """
    w = gen.uniform(0.0, math.pi, size)
    e = gen.standard_exponential(size)
    return (
        np.log(np.sin(alpha * w))
        - np.log(np.sin(w)) / alpha
        + (1.0 - alpha) / alpha * (np.log(np.sin((1.0 - alpha) * w)) - np.log(e))
    )


def sample_gumbel(n: int, alpha: float, d: int = 2, rng=None) -> np.ndarray:
    """Gumbel copula sample via the stable-frailty (Marshall-Olkin) construction."""
    _check_alpha(alpha)
    if d < 2:
        raise DimensionError("d must be at least 2")
    gen = as_generator(rng)
    if alpha == 1.0:
        return gen.random((n, d))
    log_v = _log_positive_stable(alpha, n, gen)
    e = gen.standard_exponential((n, d))
    # U_j = psi(E_j / V) with psi(s) = exp(-s^alpha)
    return np.exp(-np.exp(alpha * (np.log(e) - log_v[:, None])))


def _t_cdf(x: np.ndarray, nu: float) -> np.ndarray:
    if nu == 2.0:
        return 0.5 + x / (2.0 * np.sqrt(2.0 + x * x))
    return stats.t.cdf(x, nu)


def _t_ppf(u: np.ndarray, nu: float) -> np.ndarray:
    if nu == 2.0:
        return (2.0 * u - 1.0) / np.sqrt(2.0 * u * (1.0 - u))
    return stats.t.ppf(u, nu)


def sample_t_zero_corr(n: int, nu: float = 2.0, rng=None) -> np.ndarray:
    """Bivariate t copula with zero correlation: common chi-square mixing of two normals."""
    if nu <= 0:
        raise DomainError("nu must be positive")
    gen = as_generator(rng)
    z = gen.standard_normal((n, 2))
    w = gen.chisquare(nu, n)
    return _t_cdf(z / np.sqrt(w / nu)[:, None], nu)


def sample_asym_logistic(n: int, theta: float, phi: float, alpha: float, rng=None) -> np.ndarray:
    """Trivariate asymmetric logistic sample by max-stable superposition.

    The copula factorises as ``prod_(i,j) C_alpha(u_i^theta, u_j^phi) *
    prod_k u_k^(1-theta-phi)`` with ``C_alpha`` the bivariate Gumbel copula;
    each factor is drawn independently and coordinates combine by maxima of
    ``V^(1/weight)``.
    """
    _check_asym(theta, phi, alpha)
    gen = as_generator(rng)
    out = np.zeros((n, 3))
    for i, j in _CYCLE:
        pair = sample_gumbel(n, alpha, 2, gen)
        if theta > 0:
            out[:, i] = np.maximum(out[:, i], pair[:, 0] ** (1.0 / theta))
        if phi > 0:
            out[:, j] = np.maximum(out[:, j], pair[:, 1] ** (1.0 / phi))
    rest = 1.0 - theta - phi
    free = gen.random((n, 3))
    if rest > 1e-12:
        out = np.maximum(out, free ** (1.0 / rest))
    return out


def sample_moving_max_series(n: int, a: float, b: float, alpha: float, rng=None) -> np.ndarray:
    """``n`` consecutive states of the bivariate moving-maximum process

    ``U_t1 = max(W_{t-1,1}^(1/a), W_t1^(1/(1-a)))``,
    ``U_t2 = max(W_{t-1,2}^(1/b), W_t2^(1/(1-b)))``, with ``W_t`` iid Gumbel(alpha)
    pairs; one extra leading pair starts the recursion in stationarity.
    """
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise DomainError("a and b must lie strictly inside (0, 1)")
    _check_alpha(alpha)
    w = sample_gumbel(n + 1, alpha, 2, as_generator(rng))
    u1 = np.maximum(w[:-1, 0] ** (1.0 / a), w[1:, 0] ** (1.0 / (1.0 - a)))
    u2 = np.maximum(w[:-1, 1] ** (1.0 / b), w[1:, 1] ** (1.0 / (1.0 - b)))
    return np.column_stack([u1, u2])


# --- model objects ---------------------------------------------------------------


class CopulaModel(ABC):
    """A parametric copula: CDF, exact sampler and, for extreme-value
    families, the Pickands dependence function."""

    family: str = ""
    d: int = 2

    @abstractmethod
    def cdf(self, u): ...

    @abstractmethod
    def sample(self, n: int, rng=None) -> np.ndarray: ...

    @property
    def is_extreme_value(self) -> bool:
        return False

    def pickands(self, t):
        raise NotImplementedError(f"{self.family} is not an extreme-value copula")

    @property
    def params(self) -> dict:
        return {}

    def spec(self) -> str:
        items = [f"family={self.family}"] + [f"{k}={v}" for k, v in self.params.items()]
        return ",".join(items)

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


class _ExtremeValueModel(CopulaModel):
    @property
    def is_extreme_value(self) -> bool:
        return True

    def cdf(self, u):
        u, single = _unit_points(u, self.d)
        out = evc_cdf_from_pickands(self.pickands, u)
        return float(out[0]) if single else out


class IndependenceCopula(_ExtremeValueModel):
    family = "indep"

    def __init__(self, d: int = 2):
        if d < 2:
            raise DimensionError("d must be at least 2")
        self.d = d

    @property
    def params(self):
        return {"d": self.d}

    def cdf(self, u):
        u, single = _unit_points(u, self.d)
        out = np.prod(u, axis=1)
        return float(out[0]) if single else out

    def pickands(self, t):
        t = np.asarray(t, dtype=float)
        shape = t.shape if self.d == 2 else t.shape[:-1]
        return np.ones(shape) if shape else 1.0

    def sample(self, n, rng=None):
        return as_generator(rng).random((n, self.d))


def independence_copula(d: int = 2) -> IndependenceCopula:
    return IndependenceCopula(d)


class GumbelCopula(_ExtremeValueModel):
    """Gumbel (logistic) extreme-value copula; Kendall's tau is ``1 - alpha``."""

    family = "gumbel"

    def __init__(self, alpha: float, d: int = 2):
        _check_alpha(alpha)
        if d < 2:
            raise DimensionError("d must be at least 2")
        self.alpha = float(alpha)
        self.d = d

    @classmethod
    def from_tau(cls, tau: float, d: int = 2) -> "GumbelCopula":
        return cls(1.0 - tau, d)

    @property
    def params(self):
        return {"alpha": self.alpha, "d": self.d}

    @property
    def kendall_tau(self) -> float:
        return 1.0 - self.alpha

    def pickands(self, t):
        if self.d == 2:
            return gumbel_pickands(t, self.alpha)
        return logistic_pickands(t, self.alpha)

    def sample(self, n, rng=None):
        return sample_gumbel(n, self.alpha, self.d, rng)


class AsymmetricLogisticCopula(_ExtremeValueModel):
    family = "asymlog"
    d = 3

    def __init__(self, theta: float = 0.6, phi: float = 0.3, alpha: float = 0.5):
        _check_asym(theta, phi, alpha)
        self.theta, self.phi, self.alpha = float(theta), float(phi), float(alpha)

    @property
    def params(self):
        return {"theta": self.theta, "phi": self.phi, "alpha": self.alpha}

    def pickands(self, t):
        return asym_logistic_pickands(t, self.theta, self.phi, self.alpha)

    def sample(self, n, rng=None):
        return sample_asym_logistic(n, self.theta, self.phi, self.alpha, rng)


class MovingMaximumCopula(_ExtremeValueModel):
    """Stationary law of the moving-maximum process with Gumbel innovations.

    :meth:`sample` returns consecutive (serially dependent) states.
    """

    family = "movmax"

    def __init__(self, a: float = 0.1, b: float = 0.7, alpha: float = 0.5):
        if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
            raise DomainError("a and b must lie strictly inside (0, 1)")
        _check_alpha(alpha)
        self.a, self.b, self.alpha = float(a), float(b), float(alpha)

    @property
    def params(self):
        return {"a": self.a, "b": self.b, "alpha": self.alpha}

    def pickands(self, t):
        t = np.asarray(t, dtype=float)
        return moving_max_pickands(
            1.0 - t, self.a, self.b, lambda s: gumbel_pickands(s, self.alpha)
        )

    def sample(self, n, rng=None):
        return sample_moving_max_series(n, self.a, self.b, self.alpha, rng)


class StudentZeroCorrCopula(CopulaModel):
    """Bivariate t copula with zero correlation parameter."""

    family = "t"

    def __init__(self, nu: float = 2.0):
        if nu <= 0:
            raise DomainError("nu must be positive")
        self.nu = float(nu)

    @property
    def params(self):
        return {"nu": self.nu}

    def _cdf_one(self, x1: float, x2: float) -> float:
        nu = self.nu
        # condition on the chi-square mixing variable W
        def integrand(w):
            s = math.sqrt(w / nu)
            return stats.norm.cdf(x1 * s) * stats.norm.cdf(x2 * s) * stats.chi2.pdf(w, nu)

        val, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
        return val

    def cdf(self, u):
        u, single = _unit_points(u, 2)
        out = np.empty(len(u))
        for k, (a, b) in enumerate(u):
            if a <= 0 or b <= 0:
                out[k] = 0.0
            elif a >= 1 or b >= 1:
                out[k] = min(a, b)
            else:
                x = _t_ppf(np.array([a, b]), self.nu)
                out[k] = self._cdf_one(x[0], x[1])
        return float(out[0]) if single else out

    def sample(self, n, rng=None):
        return sample_t_zero_corr(n, self.nu, rng)


_FAMILIES = {
    "indep": (IndependenceCopula, {"d": int}),
    "independence": (IndependenceCopula, {"d": int}),
    "gumbel": (GumbelCopula, {"alpha": float, "d": int}),
    "t": (StudentZeroCorrCopula, {"nu": float}),
    "asymlog": (AsymmetricLogisticCopula, {"theta": float, "phi": float, "alpha": float}),
    "movmax": (MovingMaximumCopula, {"a": float, "b": float, "alpha": float}),
}


def parse_model_spec(text: str) -> CopulaModel:
    """Build a model from ``family=<name>,key=value,...``.

    Families and keys: ``indep`` (d), ``gumbel`` (alpha or tau, d), ``t``
    (nu), ``asymlog`` (theta, phi, alpha), ``movmax`` (a, b, alpha).
    """
    fields = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, value = part.partition("=")
        if not sep:
            raise ValueError(f"malformed model field {part!r}; expected key=value")
        fields[key.strip().lower()] = value.strip()
    family = fields.pop("family", None)
    if family is None or family.lower() not in _FAMILIES:
        raise ValueError(f"unknown or missing model family in {text!r}")
    cls, types = _FAMILIES[family.lower()]
    if cls is GumbelCopula and "tau" in fields:
        fields["alpha"] = str(1.0 - float(fields.pop("tau")))
    unknown = set(fields) - set(types)
    if unknown:
        raise ValueError(f"unknown parameter(s) {sorted(unknown)} for family {family}")
    kwargs = {k: types[k](v) for k, v in fields.items()}
    return cls(**kwargs)
