"""First-order behaviour of the expectile functional.

The derivative of ``F -> R_alpha(F)`` in direction ``v`` (an integrable
difference of cdfs) is

    dR(v) = -[(1-alpha) int_{x<R} v(x) dx + alpha int_{x>R} v(x) dx] / d_F(alpha),

with ``d_F(alpha) = (1-2 alpha) F(R) + alpha``. Written against the influence
weight ``f(t) = [(1-alpha) 1{t<=R} + alpha 1{t>R}] / d_F(alpha)``, the limit
variance of the plug-in estimator is ``int int f(t0) C_F(t0,t1) f(t1)``, where
``C_F`` sums the covariances of the indicator processes over all lags. The
production estimator uses the equivalent long-run variance of the influence
series ``Z_t = U_alpha(X_t - R) / d_F(alpha)``.

Mixing-rate conditions on the observation process (summability of the
dependence coefficients) are assumptions of the limit theory, not quantities
estimated here.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .core import DEFAULT_TOL, ExpectileEstimate, expectile, u_score
from .distributions import DistributionModel, EmpiricalDistribution, as_alpha
from .errors import InsufficientData, LagTooLarge, NonIntegrable, ValidationError

__all__ = [
    "InfluenceSpec",
    "VarianceEstimate",
    "StepFunction",
    "influence_spec",
    "influence_weight",
    "cdf_difference",
    "qh_derivative",
    "iid_variance",
    "iid_variance_model",
    "longrun_variance",
    "longrun_variance_double_integral",
    "default_max_lag",
]


@dataclass(frozen=True)
class InfluenceSpec:
    alpha: float
    expectile: float
    cdf_at_expectile: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", as_alpha(self.alpha))
        if not 0.0 <= self.cdf_at_expectile <= 1.0:
            raise ValidationError("cdf_at_expectile must lie in [0, 1]")

    @property
    def denominator(self) -> float:
        return (1.0 - 2.0 * self.alpha) * self.cdf_at_expectile + self.alpha


@dataclass(frozen=True)
class VarianceEstimate:
    s2: float
    method: str
    lag: Optional[int] = None
    expectile: Optional[float] = None
    denominator: Optional[float] = None
    flags: frozenset = field(default_factory=frozenset)

    def as_dict(self) -> dict:
        return {
            "s2": self.s2,
            "method": self.method,
            "lag": self.lag,
            "expectile": self.expectile,
            "denominator": self.denominator,
            "flags": sorted(self.flags),
        }


def influence_spec(dist, alpha, tol: float = DEFAULT_TOL) -> InfluenceSpec:
    est = expectile(dist, alpha, tol)
    return InfluenceSpec(est.alpha, est.value, est.cdf_at_value)


def influence_weight(spec: InfluenceSpec, t):
    """``(1-alpha)/d`` on ``t <= R``, ``alpha/d`` on ``t > R``."""
    t = np.asarray(t, dtype=float)
    a, d = spec.alpha, spec.denominator
    out = np.where(t <= spec.expectile, (1.0 - a) / d, a / d)
    return out if out.ndim else float(out)


class StepFunction:
    """Right-continuous step function, zero outside ``[knots[0], knots[-1])``.

    ``values[j]`` holds on ``[knots[j], knots[j+1])``.
    """

    def __init__(self, knots, values):
        k = np.asarray(knots, dtype=float)
        v = np.asarray(values, dtype=float)
        if k.ndim != 1 or v.shape != (max(k.size - 1, 0),):
            raise ValidationError("need len(values) == len(knots) - 1")
        if np.any(np.diff(k) < 0):
            raise ValidationError("knots must be nondecreasing")
        self.knots = k
        self.values = v

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.knots, x, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        out = np.where(inside, self.values[np.clip(idx, 0, max(self.values.size - 1, 0))], 0.0) \
            if self.values.size else np.zeros_like(x)
        return out if out.ndim else float(out)

    def __mul__(self, c: float) -> "StepFunction":
        return StepFunction(self.knots, c * self.values)

    __rmul__ = __mul__

    def __add__(self, other: "StepFunction") -> "StepFunction":
        k = np.union1d(self.knots, other.knots)
        mid = k[:-1]
        return StepFunction(k, self(mid) + other(mid))

    def integrate(self, a: float = -math.inf, b: float = math.inf) -> float:
        lo = np.clip(self.knots[:-1], a, b)
        hi = np.clip(self.knots[1:], a, b)
        return float(np.dot(self.values, hi - lo))


class _CdfDifference:
    """``x -> G(x) - F(x)`` carrying quadrature breakpoints."""

    def __init__(self, g, f):
        self.g, self.f = g, f
        pts: set[float] = set()
        for d in (g, f):
            if isinstance(d, EmpiricalDistribution):
                pts.update(np.unique(d.points).tolist())
            else:
                pts.update(d._breakpoints())
        self.breakpoints = sorted(pts)

    def __call__(self, x):
        return self.g.cdf(x) - self.f.cdf(x)


def cdf_difference(g, f):
    """Direction ``G - F``; a :class:`StepFunction` when both laws are empirical."""
    if isinstance(g, EmpiricalDistribution) and isinstance(f, EmpiricalDistribution):
        z = np.union1d(g.points, f.points)
        if z.size < 2:
            return StepFunction([z[0], z[0]], [0.0])
        return StepFunction(z, g.cdf(z[:-1]) - f.cdf(z[:-1]))
    return _CdfDifference(g, f)


def _quad_pieces(v: Callable, a: float, b: float, points: Sequence[float]) -> float:
    inner = sorted(p for p in points if a < p < b)
    knots = [a, *inner, b]
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        if not lo < hi:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("error", integrate.IntegrationWarning)
            try:
                val, err = integrate.quad(v, lo, hi, limit=400, epsabs=1e-13, epsrel=1e-11)
            except integrate.IntegrationWarning as exc:
                raise NonIntegrable(f"quadrature of the direction failed on [{lo}, {hi}]: {exc}") from exc
        if not (math.isfinite(val) and math.isfinite(err)):
            raise NonIntegrable(f"direction is not integrable on [{lo}, {hi}]")
        total += val
    return total


def qh_derivative(base, v, alpha, breakpoints: Sequence[float] = (),
                  tol: float = DEFAULT_TOL) -> float:
    """Derivative of the expectile functional at ``base`` in direction ``v``.

    Parameters
    ----------
    base : EmpiricalDistribution or DistributionModel
    v : StepFunction or callable
        Integrable direction, typically ``cdf_difference(G, F)``. Step
        functions are integrated exactly; callables by adaptive quadrature,
        split at ``breakpoints`` (and at ``v.breakpoints`` if present).
    alpha : float

    Raises
    ------
    NonIntegrable
        If the quadrature does not converge (e.g. ``int |v| = inf``).
    """
    a = as_alpha(alpha)
    est = expectile(base, a, tol)
    R = est.value
    if isinstance(v, StepFunction):
        below, above = v.integrate(-math.inf, R), v.integrate(R, math.inf)
    else:
        pts = list(breakpoints) + list(getattr(v, "breakpoints", ()))
        below = _quad_pieces(v, -math.inf, R, pts)
        above = _quad_pieces(v, R, math.inf, pts)
    return -((1.0 - a) * below + a * above) / est.denominator


def _variance_flags(dist: EmpiricalDistribution, est: ExpectileEstimate) -> set:
    flags = set()
    pos = dist.points[dist.weights > 0]
    if pos.size == 0 or pos[0] == pos[-1]:
        flags.add("degenerate")
    elif np.any(pos == est.value):
        flags.add("atom_at_expectile")
    return flags


def iid_variance(dist: EmpiricalDistribution, alpha, tol: float = DEFAULT_TOL) -> VarianceEstimate:
    """Plug-in ``E[U_alpha(X - R)^2] / d^2`` for independent observations.

    A constant sample returns ``s2 = 0`` flagged ``"degenerate"``. When the
    estimate sits on an atom the formula loses its justification and the
    result is flagged ``"atom_at_expectile"``.
    """
    if dist.n < 2:
        raise InsufficientData("iid_variance needs at least two observations")
    est = expectile(dist, alpha, tol)
    flags = _variance_flags(dist, est)
    if "degenerate" in flags:
        return VarianceEstimate(0.0, "iid_plugin", None, est.value, est.denominator, frozenset(flags))
    u = u_score(est.alpha, dist.points - est.value)
    s2 = float(np.dot(dist.weights, u * u) / dist.n) / est.denominator ** 2
    return VarianceEstimate(s2, "iid_plugin", None, est.value, est.denominator, frozenset(flags))


def iid_variance_model(model: DistributionModel, alpha, tol: float = DEFAULT_TOL) -> float:
    """Limit variance for i.i.d. draws from an analytic model."""
    est = expectile(model, alpha, tol)
    a = est.alpha
    up, lo = model.partial_second_moments(est.value)
    return (a * a * up + (1.0 - a) ** 2 * lo) / est.denominator ** 2


def default_max_lag(n: int) -> int:
    return int(math.floor(n ** (1.0 / 3.0)))


def _kernel_weights(max_lag: int, kernel: str) -> np.ndarray:
    k = np.arange(1, max_lag + 1)
    if kernel == "bartlett":
        return 1.0 - k / (max_lag + 1.0)
    if kernel in ("truncated", "none"):
        return np.ones(max_lag)
    raise ValidationError(f"unknown kernel {kernel!r}")


def _check_series(dist: EmpiricalDistribution, max_lag: int):
    if not dist.is_uniform:
        raise ValidationError("long-run variance needs an unweighted time series")
    if max_lag < 0 or max_lag >= dist.n:
        raise LagTooLarge(f"max_lag must lie in [0, n-1] = [0, {dist.n - 1}], got {max_lag}")


def longrun_variance(dist: EmpiricalDistribution, alpha, max_lag: Optional[int] = None,
                     kernel: str = "bartlett", tol: float = DEFAULT_TOL) -> VarianceEstimate:
    """Long-run variance of the influence series ``Z_t = U_alpha(X_t - R)/d``.

    ``gamma_0 + 2 sum_{k=1}^{L} w_k gamma_k`` with ``gamma_k = (1/n) sum_t
    Z_t Z_{t+k}`` and Bartlett weights ``w_k = 1 - k/(L+1)`` by default
    (``kernel="truncated"`` uses unit weights). The series has mean exactly
    zero at the root, so no centring is applied. ``max_lag`` defaults to
    ``floor(n ** (1/3))``.
    """
    n = dist.n
    L = default_max_lag(n) if max_lag is None else int(max_lag)
    _check_series(dist, L)
    est = expectile(dist, alpha, tol)
    flags = _variance_flags(dist, est)
    method = "longrun_series"
    if "degenerate" in flags:
        return VarianceEstimate(0.0, method, L, est.value, est.denominator, frozenset(flags))
    z = u_score(est.alpha, dist.observations - est.value) / est.denominator
    s2 = float(np.dot(z, z)) / n
    w = _kernel_weights(L, kernel)
    for k in range(1, L + 1):
        s2 += 2.0 * w[k - 1] * float(np.dot(z[:-k], z[k:])) / n
    return VarianceEstimate(max(s2, 0.0) if kernel == "bartlett" else s2, method, L,
                            est.value, est.denominator, frozenset(flags))


def longrun_variance_double_integral(dist, alpha, max_lag: int = 0, kernel: str = "truncated",
                                     grid_points: int = 2000, q_trunc: float = 1e-4,
                                     tol: float = DEFAULT_TOL) -> VarianceEstimate:
    """Brute-force ``int int f(t0) C(t0,t1) f(t1) dt0 dt1`` as a midpoint Riemann sum.

    For an empirical time series ``C`` is built from the lagged sample
    cross-covariances of the indicator processes ``1{X_s <= t}`` (lags up to
    ``max_lag`` with the given kernel); for an analytic model only the
    i.i.d. term ``F(t0 ^ t1) (1 - F(t0 v t1))`` is available. The grid spans
    the ``q_trunc`` and ``1 - q_trunc`` quantiles with ``grid_points`` nodes,
    refined by the data points and the expectile so that every cell lies
    between two jumps; the sum is then exact for empirical input. Cost is
    quadratic in the grid size; meant for verification, not production.
    """
    a = as_alpha(alpha)
    spec = influence_spec(dist, a, tol)
    lo, hi = float(dist.quantile(q_trunc)), float(dist.quantile(1.0 - q_trunc))
    knots = [spec.expectile]
    if isinstance(dist, EmpiricalDistribution):
        lo, hi = min(lo, dist.points[0]), max(hi, dist.points[-1])
        knots.extend(dist.points.tolist())
    if not hi > lo:
        return VarianceEstimate(0.0, "longrun_double_integral", max_lag, spec.expectile,
                                spec.denominator, frozenset({"degenerate"}))
    edges = np.union1d(np.linspace(lo, hi, grid_points), np.clip(knots, lo, hi))
    t = 0.5 * (edges[:-1] + edges[1:])
    g = np.diff(edges) * influence_weight(spec, t)
    Ft = np.asarray(dist.cdf(t), dtype=float)
    if isinstance(dist, EmpiricalDistribution):
        _check_series(dist, max_lag)
        n = dist.n
        D = (dist.observations[None, :] <= t[:, None]).astype(float) - Ft[:, None]
        C = D @ D.T / n
        w = _kernel_weights(max_lag, kernel)
        for j in range(1, max_lag + 1):
            Cj = D[:, : n - j] @ D[:, j:].T / n
            C += w[j - 1] * (Cj + Cj.T)
    else:
        if max_lag != 0:
            raise ValidationError("analytic models carry no serial dependence; use max_lag=0")
        C = np.minimum.outer(Ft, Ft) * (1.0 - np.maximum.outer(Ft, Ft))
    s2 = float(g @ C @ g)
    return VarianceEstimate(s2, "longrun_double_integral", max_lag, spec.expectile,
                            spec.denominator, frozenset())
