"""Parametric expectile estimation for the log-normal and Pareto families.

The plug-in estimate is ``R_alpha(F_theta_hat)`` with ``theta_hat`` a maximum
likelihood (or Hill) estimate. Its limit law follows from the delta method:
``Var = g' Sigma g`` with ``Sigma`` the inverse Fisher information and
``g_j = dR(dF/dtheta_j)`` the expectile derivative applied to the parameter
derivative of the cdf.

Closed-form limit variances
---------------------------
Log-normal, ``theta = (m, s^2)``, ``Sigma = diag(s^2, 2 s^4)``::

    e^{2m+s^2} / d^2 * [G^2 s^2 + (s^2/2) (s G + (2 alpha - 1) phi(psi))^2]

with ``psi = (m + s^2 - log R)/s``, ``G = 1 - alpha - (1 - 2 alpha) Phi(psi)``
and ``d = (1 - 2 alpha) F(R) + alpha``.

Pareto with known scale ``c``, ``theta = a``, ``Sigma = a^2``::

    a^2 c^2 / ((1 - a)^4 d^2) * phi_a^2,
    phi_a = (R/c)^{1-a} (1 - (1-a) log(R/c)) (1 - 2 alpha) + alpha - 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import special, stats

from .asymptotics import qh_derivative
from .bootstrap import ConfidenceInterval
from .core import DEFAULT_TOL, ExpectileEstimate, expectile_model
from .distributions import DistributionModel, as_alpha
from .errors import (
    DomainError,
    InsufficientData,
    KTooLarge,
    OutsideParameterSpace,
    ValidationError,
    ZeroVariance,
)

__all__ = [
    "LogNormalParams",
    "ParetoParams",
    "ParamEstimate",
    "LogNormalModel",
    "ParetoModel",
    "lognormal_mle",
    "pareto_mle",
    "hill_estimator",
    "default_hill_k",
    "lognormal_partial_moment",
    "pareto_partial_moment",
    "lognormal_expectile",
    "pareto_expectile",
    "lognormal_hadamard_derivative",
    "pareto_hadamard_derivative",
    "lognormal_asym_variance",
    "lognormal_variance_display",
    "pareto_asym_variance",
    "numerical_delta_variance",
    "asym_variance",
    "model_for",
    "delta_method_ci",
]

S2_FLOOR = 1e-12


@dataclass(frozen=True)
class LogNormalParams:
    m: float
    s2: float

    def __post_init__(self):
        if not (self.s2 > 0 and math.isfinite(self.s2) and math.isfinite(self.m)):
            raise OutsideParameterSpace(f"log-normal needs finite m and s2 > 0, got {self}")

    @property
    def s(self) -> float:
        return math.sqrt(self.s2)

    @property
    def mean(self) -> float:
        return math.exp(self.m + 0.5 * self.s2)


@dataclass(frozen=True)
class ParetoParams:
    a: float
    c_bar: float = 1.0

    def __post_init__(self):
        if not (self.a > 1 and math.isfinite(self.a)):
            raise OutsideParameterSpace(f"Pareto tail index must exceed 1, got {self.a!r}")
        if not self.c_bar > 0:
            raise OutsideParameterSpace(f"Pareto scale must be positive, got {self.c_bar!r}")

    @property
    def mean(self) -> float:
        return self.a * self.c_bar / (self.a - 1.0)


@dataclass(frozen=True)
class ParamEstimate:
    """Fitted parameters with their asymptotic covariance.

    ``params`` is ``None`` when the raw estimate falls outside the parameter
    space (Pareto ``a <= 1``); ``raw`` always holds the unconstrained value.
    ``n_effective`` is the rate denominator (``n``, or ``k`` for Hill).
    """

    method: str
    params: Optional[Union[LogNormalParams, ParetoParams]]
    raw: tuple
    n_effective: int
    asym_cov: np.ndarray
    flags: frozenset = field(default_factory=frozenset)

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "params": None if self.params is None else dict(self.params.__dict__),
            "raw": list(self.raw),
            "n_effective": self.n_effective,
            "asym_cov": np.atleast_1d(self.asym_cov).tolist(),
            "flags": sorted(self.flags),
        }


def _sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValidationError("sample must be finite")
    return x


def lognormal_mle(sample, fallback_m: float = 0.0, fallback_s2: float = 1.0) -> ParamEstimate:
    """Mean and (divide-by-n) variance of the logs; fallbacks if any ``x <= 0``."""
    x = _sample(sample)
    if x.size < 2:
        raise InsufficientData("log-normal fit needs at least two observations")
    flags = set()
    if x.min() > 0:
        logs = np.log(x)
        m = float(logs.mean())
        s2 = float(np.mean((logs - m) ** 2))
        raw = (m, s2)
        if s2 < S2_FLOOR:
            s2 = S2_FLOOR
            flags.add("zero_variance")
    else:
        m, s2 = float(fallback_m), float(fallback_s2)
        raw = (m, s2)
        flags.add("fallback")
    p = LogNormalParams(m, s2)
    return ParamEstimate("lognormal_mle", p, raw, int(x.size),
                         np.diag([s2, 2.0 * s2 * s2]), frozenset(flags))


def _pareto_estimate(method: str, a: float, c_bar: float, n_eff: int, flags: set) -> ParamEstimate:
    if a <= 1.0:
        flags.add("outside_parameter_space")
        params = None
    else:
        params = ParetoParams(a, c_bar)
    return ParamEstimate(method, params, (a,), n_eff, np.array([[a * a]]), frozenset(flags))


def pareto_mle(sample, c_bar: float = 1.0, fallback_a: float = 2.0) -> ParamEstimate:
    """Reciprocal mean log-excess over the known scale ``c_bar``."""
    x = _sample(sample)
    if x.size < 1:
        raise InsufficientData("Pareto fit needs at least one observation")
    if not c_bar > 0:
        raise OutsideParameterSpace("c_bar must be positive")
    flags = set()
    if x.min() > c_bar:
        a = 1.0 / float(np.mean(np.log(x) - math.log(c_bar)))
    else:
        a = float(fallback_a)
        flags.add("fallback")
    return _pareto_estimate("pareto_mle", a, c_bar, int(x.size), flags)


def default_hill_k(n: int) -> int:
    return int(math.floor(n ** 0.4))


def hill_estimator(sample, k: Optional[int] = None, c_bar: float = 1.0,
                   fallback_a: float = 2.0) -> ParamEstimate:
    """Hill tail-index estimate from the top ``k`` order statistics.

    ``{(1/k) sum_{i=1}^k log x_(n-i+1) - log x_(n-k)}^{-1}``. The fallback
    applies when one of the first ``k`` observations (in sample order) is at
    or below ``c_bar``.

    Raises
    ------
    KTooLarge
        Unless ``1 <= k <= n - 1``.
    """
    x = _sample(sample)
    n = x.size
    k = default_hill_k(n) if k is None else int(k)
    if not 1 <= k <= n - 1:
        raise KTooLarge(f"need 1 <= k <= n-1, got k={k}, n={n}")
    flags = set()
    if x[:k].min() > c_bar:
        xs = np.sort(x)
        gap = float(np.mean(np.log(xs[n - k:])) - math.log(xs[n - k - 1]))
        if gap > 0:
            a = 1.0 / gap
        else:
            a = math.inf
            flags.add("tied_order_statistics")
    else:
        a = float(fallback_a)
        flags.add("fallback")
    if not math.isfinite(a):
        return ParamEstimate("hill", None, (a,), k, np.array([[math.inf]]),
                             frozenset(flags | {"outside_parameter_space"}))
    return _pareto_estimate("hill", a, c_bar, k, flags)


def lognormal_partial_moment(p: LogNormalParams, t: float) -> float:
    """``E[(X - t)^+]`` for ``t > 0``."""
    if not t > 0:
        raise DomainError("log-normal partial moment needs t > 0")
    s = p.s
    lt = math.log(t)
    return float(math.exp(p.m + 0.5 * p.s2) * special.ndtr((p.m + p.s2 - lt) / s)
                 - t * special.ndtr((p.m - lt) / s))


def pareto_partial_moment(p: ParetoParams, t: float) -> float:
    """``E[(X - t)^+]``; equals ``mean - t`` below the scale."""
    if t < p.c_bar:
        return p.mean - t
    return p.c_bar ** p.a * t ** (1.0 - p.a) / (p.a - 1.0)


class LogNormalModel(DistributionModel):
    family = "lognormal"

    def __init__(self, params: LogNormalParams):
        self.p = params

    def __repr__(self):
        return f"LogNormalModel(m={self.p.m}, s2={self.p.s2})"

    def params(self):
        return {"m": self.p.m, "s2": self.p.s2}

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(np.where(x > 0, x, 1.0)) - self.p.m) / self.p.s
        return np.where(x > 0, special.ndtr(z), 0.0)

    @property
    def mean(self):
        return self.p.mean

    def quantile(self, p):
        return np.exp(self.p.m + self.p.s * special.ndtri(p))

    def support(self):
        return 0.0, math.inf

    def sample(self, n, rng):
        return rng.lognormal(self.p.m, self.p.s, size=n)

    def upper_partial_moment(self, t):
        return self.mean - t if t <= 0 else lognormal_partial_moment(self.p, t)


class ParetoModel(DistributionModel):
    family = "pareto"

    def __init__(self, params: ParetoParams):
        self.p = params

    def __repr__(self):
        return f"ParetoModel(a={self.p.a}, c_bar={self.p.c_bar})"

    def params(self):
        return {"a": self.p.a, "c_bar": self.p.c_bar}

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        c = self.p.c_bar
        return np.where(x > c, 1.0 - (c / np.maximum(x, c)) ** self.p.a, 0.0)

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        c = self.p.c_bar
        return np.where(x > c, (c / np.maximum(x, c)) ** self.p.a, 1.0)

    @property
    def mean(self):
        return self.p.mean

    def quantile(self, p):
        return self.p.c_bar * (1.0 - np.asarray(p, dtype=float)) ** (-1.0 / self.p.a)

    def support(self):
        return self.p.c_bar, math.inf

    def sample(self, n, rng):
        return self.p.c_bar * (1.0 + rng.pareto(self.p.a, size=n))

    def upper_partial_moment(self, t):
        return pareto_partial_moment(self.p, t)


def model_for(params: Union[LogNormalParams, ParetoParams]) -> DistributionModel:
    if isinstance(params, LogNormalParams):
        return LogNormalModel(params)
    if isinstance(params, ParetoParams):
        return ParetoModel(params)
    raise ValidationError(f"no model for {type(params).__name__}")


def lognormal_expectile(p: LogNormalParams, alpha, tol: float = DEFAULT_TOL) -> ExpectileEstimate:
    """Expectile of ``LN(m, s2)``; always positive."""
    return expectile_model(LogNormalModel(p), alpha, tol)


def pareto_expectile(p: ParetoParams, alpha, tol: float = DEFAULT_TOL) -> ExpectileEstimate:
    """Expectile of ``Par(a, c_bar)``; always above ``c_bar``."""
    return expectile_model(ParetoModel(p), alpha, tol)


def lognormal_hadamard_derivative(p: LogNormalParams, tau, x):
    """``d/de F_{(m + e tau1, s2 + e tau2)}(x)`` at ``e = 0``.

    ``-(tau1/s + (log x - m) tau2 / (2 s^3)) phi((log x - m)/s)`` for
    ``x > 0``, zero otherwise.
    """
    t1, t2 = tau
    x = np.asarray(x, dtype=float)
    pos = x > 0
    lx = np.log(np.where(pos, x, 1.0)) - p.m
    s = p.s
    out = np.where(pos, -(t1 / s + lx * t2 / (2.0 * s ** 3)) * stats.norm.pdf(lx / s), 0.0)
    return out if out.ndim else float(out)


def pareto_hadamard_derivative(p: ParetoParams, y: float, x):
    """``d/de F_{a + e y}(x)`` at ``e = 0``: ``y log(x/c) (c/x)^a`` for ``x > c``."""
    x = np.asarray(x, dtype=float)
    c = p.c_bar
    xc = np.maximum(x, c)
    out = np.where(x > c, y * np.log(xc / c) * (c / xc) ** p.a, 0.0)
    return out if out.ndim else float(out)


def lognormal_asym_variance(p: LogNormalParams, alpha, argument_divisor: str = "s",
                            tol: float = DEFAULT_TOL) -> float:
    """Limit variance of ``sqrt(n) (R(F_theta_hat) - R(F_theta))`` for the log-normal MLE.

    Parameters
    ----------
    argument_divisor : {"s", "2"}
        Divisor in ``psi = (m + s^2 - log R)/divisor``. ``"s"`` is the exact
        delta-method variance; ``"2"`` is an alternative kept for
        comparison and is wrong whenever ``s != 2``.
    """
    a = as_alpha(alpha)
    est = lognormal_expectile(p, a, tol)
    div = _divisor(p, argument_divisor)
    s, s2 = p.s, p.s2
    psi = (p.m + s2 - math.log(est.value)) / div
    G = 1.0 - a - (1.0 - 2.0 * a) * special.ndtr(psi)
    inner = s * G + (2.0 * a - 1.0) * stats.norm.pdf(psi)
    return float(math.exp(2.0 * p.m + s2) / est.denominator ** 2 * (G * G * s2 + 0.5 * s2 * inner ** 2))


def lognormal_variance_display(p: LogNormalParams, alpha, argument_divisor: str = "2",
                               tol: float = DEFAULT_TOL) -> float:
    """Alternative closed form ``e^{2m+s^2} (1 + 2 {s + phi/G}^2) (G/d)^2``.

    Kept for comparison only; it does not match the delta-method variance.
    """
    a = as_alpha(alpha)
    est = lognormal_expectile(p, a, tol)
    z = (p.m + p.s2 - math.log(est.value)) / _divisor(p, argument_divisor)
    G = 1.0 - a - (1.0 - 2.0 * a) * special.ndtr(z)
    return float(math.exp(2.0 * p.m + p.s2) * (1.0 + 2.0 * (p.s + stats.norm.pdf(z) / G) ** 2)
                 * (G / est.denominator) ** 2)


def _divisor(p: LogNormalParams, argument_divisor: str) -> float:
    if argument_divisor == "s":
        return p.s
    if argument_divisor == "2":
        return 2.0
    raise ValidationError(f"argument_divisor must be 's' or '2', got {argument_divisor!r}")


def pareto_asym_variance(p: ParetoParams, alpha, tol: float = DEFAULT_TOL) -> float:
    """Limit variance of ``sqrt(n) (R(F_a_hat) - R(F_a))`` for the Pareto MLE (``Var Y = a^2``)."""
    a_lvl = as_alpha(alpha)
    est = pareto_expectile(p, a_lvl, tol)
    a, c = p.a, p.c_bar
    r = est.value / c
    phi = r ** (1.0 - a) * (1.0 - (1.0 - a) * math.log(r)) * (1.0 - 2.0 * a_lvl) + a_lvl - 1.0
    return float(a * a * c * c * phi * phi / ((1.0 - a) ** 4 * est.denominator ** 2))


def asym_variance(params, alpha, tol: float = DEFAULT_TOL) -> float:
    if isinstance(params, LogNormalParams):
        return lognormal_asym_variance(params, alpha, tol=tol)
    if isinstance(params, ParetoParams):
        return pareto_asym_variance(params, alpha, tol=tol)
    raise ValidationError(f"no variance formula for {type(params).__name__}")


def numerical_delta_variance(params, alpha, method: str = "derivative",
                             step: float = 1e-5, tol: float = 1e-13) -> float:
    """Delta-method variance ``g' Sigma g`` computed without the closed form.

    ``method="derivative"`` takes ``g_j = dR(dF/dtheta_j)`` by quadrature of
    the cdf derivative along each coordinate; ``method="finite_difference"``
    takes ``g_j`` as central differences of ``theta -> R(F_theta)``.
    """
    a = as_alpha(alpha)
    if isinstance(params, LogNormalParams):
        base = LogNormalModel(params)
        cov = np.diag([params.s2, 2.0 * params.s2 ** 2])
        dirs = [(1.0, 0.0), (0.0, 1.0)]
        breaks = [0.0, math.exp(params.m)]

        def direction(u):
            return lambda x: lognormal_hadamard_derivative(params, u, x)

        def shifted(u, h):
            return LogNormalParams(params.m + h * u[0], params.s2 + h * u[1])
    elif isinstance(params, ParetoParams):
        base = ParetoModel(params)
        cov = np.array([[params.a ** 2]])
        dirs = [(1.0,)]
        breaks = [params.c_bar, 2.0 * params.c_bar]

        def direction(u):
            return lambda x: pareto_hadamard_derivative(params, u[0], x)

        def shifted(u, h):
            return ParetoParams(params.a + h * u[0], params.c_bar)
    else:
        raise ValidationError(f"unsupported parameters {type(params).__name__}")

    if method == "derivative":
        g = np.array([qh_derivative(base, direction(u), a, breakpoints=breaks) for u in dirs])
    elif method == "finite_difference":
        h = step * max(1.0, max(abs(v) for v in params.__dict__.values()))
        g = np.array([
            (expectile_model(model_for(shifted(u, h)), a, tol).value
             - expectile_model(model_for(shifted(u, -h)), a, tol).value) / (2.0 * h)
            for u in dirs
        ])
    else:
        raise ValidationError(f"unknown method {method!r}")
    return float(g @ cov @ g)


def delta_method_ci(estimate: ParamEstimate, alpha, level: float = 0.95,
                    tol: float = DEFAULT_TOL) -> ConfidenceInterval:
    """``R(F_theta_hat) +- z * sqrt(asym_var / n_effective)``.

    Raises
    ------
    OutsideParameterSpace
        If the estimate has no valid parameters.
    ZeroVariance
        If the fit is flagged degenerate or the variance is not positive.
    """
    if not 0.0 < level < 1.0:
        raise ValidationError("level must lie in (0, 1)")
    if estimate.params is None:
        raise OutsideParameterSpace(f"estimate {estimate.raw} lies outside the parameter space")
    if "zero_variance" in estimate.flags:
        raise ZeroVariance("fitted log-variance is zero")
    a = as_alpha(alpha)
    point = expectile_model(model_for(estimate.params), a, tol).value
    var = asym_variance(estimate.params, a, tol)
    if not var > 0:
        raise ZeroVariance("asymptotic variance is zero")
    half = float(stats.norm.ppf(0.5 + 0.5 * level)) * math.sqrt(var / estimate.n_effective)
    return ConfidenceInterval(point - half, point + half, level, "delta_method")
