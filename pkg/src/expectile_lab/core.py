"""Expectiles as zeros of a decreasing score curve.

The alpha-expectile of a law F is the unique root in m of

    U(m) = int U_alpha(x - m) dF(x),    U_alpha(x) = alpha*x if x >= 0 else (1-alpha)*x,

which is continuous and strictly decreasing with slope
``-[(1-alpha) F(m) + alpha (1 - F(m))]`` wherever F is continuous.

For a weighted empirical law the curve is piecewise linear between order
statistics, so after locating the bracketing pair of atoms the root follows
from a single (exact) Newton step. Analytic models are solved by bracketed
safeguarded Newton iteration on the partial-moment form
``alpha*E[(X-m)^+] - (1-alpha)*E[(m-X)^+]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import (
    DistributionModel,
    EmpiricalDistribution,
    _piecewise_quad,
    as_alpha,
)
from .errors import BracketingFailure, InvalidTolerance, LengthMismatch, NumericalError, ValidationError

__all__ = [
    "DEFAULT_TOL",
    "ExpectileEstimate",
    "AxiomReport",
    "u_score",
    "v_loss",
    "u_curve_empirical",
    "u_curve_model",
    "expectile_empirical",
    "expectile_weighted_batch",
    "expectile_model",
    "expectile",
    "wasserstein1",
    "var_quantile",
    "avar",
    "check_axioms",
    "find_subadditivity_counterexample",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class ExpectileEstimate:
    """Solved expectile together with the slope denominator at the root.

    ``denominator = (1 - 2 alpha) F(value) + alpha`` is the (right-limit)
    magnitude of the score curve's slope at the solution; it reappears in every
    derivative and variance formula.
    """

    alpha: float
    value: float
    n: Optional[int]
    denominator: float
    cdf_at_value: float

    def __float__(self):
        return self.value


def u_score(alpha, x):
    """Asymmetric linear score: ``alpha*x`` for ``x >= 0``, ``(1-alpha)*x`` otherwise."""
    a = as_alpha(alpha)
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, a * x, (1.0 - a) * x)
    return out if out.ndim else float(out)


def v_loss(alpha, x):
    """Asymmetric squared loss whose minimiser is the expectile."""
    a = as_alpha(alpha)
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, a * x * x, (1.0 - a) * x * x)
    return out if out.ndim else float(out)


def u_curve_empirical(dist: EmpiricalDistribution, alpha, m: float) -> float:
    """``(1/n) sum_i w_i U_alpha(x_i - m)``."""
    a = as_alpha(alpha)
    d = dist.points - m
    s = np.where(d >= 0, a * d, (1.0 - a) * d)
    return float(np.dot(dist.weights, s) / dist.n)


def u_curve_model(model: DistributionModel, alpha, m: float) -> float:
    """``alpha E[(X-m)^+] - (1-alpha) E[(m-X)^+]`` for an analytic model."""
    a = as_alpha(alpha)
    return (2.0 * a - 1.0) * model.upper_partial_moment(m) - (1.0 - a) * (m - model.mean)


def _check_tol(tol):
    if not (tol > 0) or not math.isfinite(tol):
        raise InvalidTolerance(f"tol must be positive and finite, got {tol!r}")


def expectile_weighted_batch(points: np.ndarray, weights: np.ndarray, alpha) -> np.ndarray:
    """Expectiles of many reweightings of one sorted support.

    Parameters
    ----------
    points : ndarray, shape (n,)
        Sorted support points.
    weights : ndarray, shape (B, n)
        Nonnegative weights aligned with ``points``; every row needs positive
        total mass.
    alpha : float

    Returns
    -------
    ndarray, shape (B,)
    """
    a = as_alpha(alpha)
    pts = np.asarray(points, dtype=float)
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    # centring keeps the prefix sums well conditioned
    c = 0.5 * (pts[0] + pts[-1])
    x = pts - c
    S = np.cumsum(W, axis=1)
    T = np.cumsum(W * x, axis=1)
    w_tot = S[:, -1:]
    x_tot = T[:, -1:]
    # n * U(x_k): alpha * sum_{i>k} w_i (x_i - x_k) - (1-alpha) * sum_{i<=k} w_i (x_k - x_i)
    u = a * ((x_tot - T) - x * (w_tot - S)) - (1.0 - a) * (x * S - T)
    k = np.clip((u >= 0).sum(axis=1) - 1, 0, pts.size - 1)
    rows = np.arange(W.shape[0])
    below_w = S[rows, k]
    below_x = T[rows, k]
    above_w = w_tot[:, 0] - below_w
    above_x = x_tot[:, 0] - below_x
    return (a * above_x + (1.0 - a) * below_x) / (a * above_w + (1.0 - a) * below_w) + c


def _denominator(a: float, F: float) -> float:
    return (1.0 - 2.0 * a) * F + a


def expectile_empirical(dist: EmpiricalDistribution, alpha, tol: float = DEFAULT_TOL) -> ExpectileEstimate:
    """Empirical (weighted) expectile, the Z-estimator ``sum_i w_i U_alpha(x_i - m) = 0``.

    The score curve is evaluated at every atom through prefix sums, the last
    atom with a nonnegative score brackets the root together with its right
    neighbour, and the root of the linear piece in between is returned. A
    final Newton step using the right-continuous slope mops up rounding.

    Raises
    ------
    InvalidTolerance
        If ``tol <= 0``.
    """
    a = as_alpha(alpha)
    _check_tol(tol)
    m = float(expectile_weighted_batch(dist.points, dist.weights[None, :], a)[0])
    lo, hi = float(dist.points[0]), float(dist.points[-1])
    m = min(max(m, lo), hi)
    u = u_curve_empirical(dist, a, m)
    F = dist.cdf(m)
    if u != 0.0:
        slope = (1.0 - a) * F + a * (1.0 - F)
        cand = min(max(m + u / slope, lo), hi)
        if abs(u_curve_empirical(dist, a, cand)) < abs(u):
            m = cand
            u = u_curve_empirical(dist, a, m)
            F = dist.cdf(m)
    if abs(u) > tol * (1.0 + abs(m)) * max(1.0, hi - lo):
        raise NumericalError(f"empirical expectile residual {u!r} exceeds tolerance")
    return ExpectileEstimate(a, m, dist.n, _denominator(a, F), float(F))


def expectile_model(model: DistributionModel, alpha, tol: float = DEFAULT_TOL,
                    max_expand: int = 200, max_iter: int = 500) -> ExpectileEstimate:
    """Expectile of an analytic model.

    The bracket starts at the mean (the root lies above it when
    ``alpha >= 1/2`` and below otherwise) and expands by powers of two until
    the score changes sign; then safeguarded Newton steps with slope
    ``-[(1-alpha) F(m) + alpha (1 - F(m))]`` shrink it.

    Raises
    ------
    InvalidTolerance
        If ``tol <= 0``.
    BracketingFailure
        If no sign change is found after ``max_expand`` doublings.
    """
    a = as_alpha(alpha)
    _check_tol(tol)
    mu = float(model.mean)
    if not math.isfinite(mu):
        raise BracketingFailure("model mean is not finite")

    def f(m):
        return u_curve_model(model, a, m)

    f_mu = f(mu)
    if f_mu == 0.0:
        F = float(model.cdf(mu))
        return ExpectileEstimate(a, mu, None, _denominator(a, F), F)
    scale = abs(mu) if mu != 0.0 else 1.0
    direction = 1.0 if f_mu > 0 else -1.0
    step = scale
    other = mu
    for _ in range(max_expand):
        other = mu + direction * step
        if (f(other) < 0) if direction > 0 else (f(other) > 0):
            break
        step *= 2.0
    else:
        raise BracketingFailure(f"no sign change within {max_expand} doublings of the step")
    lo, hi = (mu, other) if direction > 0 else (other, mu)

    eps = np.finfo(float).eps
    m = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fm = f(m)
        if fm == 0.0:
            break
        if fm > 0:
            lo = m
        else:
            hi = m
        F = float(model.cdf(m))
        slope = (1.0 - a) * F + a * (1.0 - F)
        cand = m + fm / slope if slope > 0 else 0.5 * (lo + hi)
        if not (lo < cand < hi):
            cand = 0.5 * (lo + hi)
        done = abs(cand - m) <= 0.5 * tol * (1.0 + abs(m))
        m = cand
        if done or hi - lo <= max(tol, 4 * eps) * (1.0 + abs(m)):
            break
    F = float(model.cdf(m))
    return ExpectileEstimate(a, float(m), None, _denominator(a, F), F)


def expectile(dist, alpha, tol: float = DEFAULT_TOL) -> ExpectileEstimate:
    """Dispatch to the empirical or the model solver."""
    if isinstance(dist, EmpiricalDistribution):
        return expectile_empirical(dist, alpha, tol)
    return expectile_model(dist, alpha, tol)


def wasserstein1(f, g) -> float:
    """``int |F - G| dx``: exact for two empirical laws, quadrature otherwise."""
    if isinstance(f, EmpiricalDistribution) and isinstance(g, EmpiricalDistribution):
        z = np.union1d(f.points, g.points)
        if z.size < 2:
            return 0.0
        diff = np.abs(f.cdf(z[:-1]) - g.cdf(z[:-1]))
        return float(np.dot(diff, np.diff(z)))
    knots: set[float] = set()
    for d in (f, g):
        if isinstance(d, EmpiricalDistribution):
            knots.update(np.unique(d.points).tolist())
        else:
            knots.update(d._breakpoints())
    pts = sorted(knots)
    # beyond the outermost knots only model tails remain
    return _piecewise_quad(lambda x: abs(f.cdf(x) - g.cdf(x)), -math.inf, math.inf, pts)


def var_quantile(dist: EmpiricalDistribution, alpha) -> float:
    """Left-continuous empirical quantile ``F^<-(alpha)``."""
    return float(dist.quantile(as_alpha(alpha)))


def avar(dist: EmpiricalDistribution, alpha) -> float:
    """``(1/(1-alpha)) int_(alpha,1) F^<-(s) ds`` on the empirical step quantile function."""
    a = as_alpha(alpha)
    cw = np.cumsum(dist.weights) / dist.n
    cw[-1] = 1.0
    left = np.concatenate(([0.0], cw[:-1]))
    length = np.clip(cw - np.maximum(left, a), 0.0, None)
    return float(np.dot(length, dist.points) / (1.0 - a))


@dataclass(frozen=True)
class AxiomReport:
    """Outcome of checking the risk-measure axioms on paired samples.

    ``monotone`` is ``None`` when the pair is not pointwise ordered.
    ``subadditivity_gap`` is ``rho(X1+X2) - rho(X1) - rho(X2)``; positive
    values beyond ``tolerance`` are violations.
    """

    alpha: float
    cash_violation: float
    homogeneity_violation: float
    monotone: Optional[bool]
    subadditivity_gap: float
    subadditive: bool
    tolerance: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _paired(x):
    if isinstance(x, EmpiricalDistribution):
        return x.observations
    return np.asarray(x, dtype=float).ravel()


def check_axioms(x1, x2, alpha, cash: float = 1.0, scale: float = 2.0,
                 tol: float = DEFAULT_TOL) -> AxiomReport:
    """Check cash-invariance, homogeneity, monotonicity and subadditivity.

    ``x1`` and ``x2`` are aligned realisations of two random variables on the
    same scenarios (arrays, or empirical distributions in observation order).
    Violations are measured against ``2 * tol`` scaled by the data magnitude.
    """
    a = as_alpha(alpha)
    s1, s2 = _paired(x1), _paired(x2)
    if s1.size != s2.size:
        raise LengthMismatch(f"paired samples differ in length: {s1.size} vs {s2.size}")
    if scale < 0:
        raise ValidationError("scale must be nonnegative")

    def rho(v):
        return expectile_empirical(EmpiricalDistribution(v), a, tol).value

    r1, r2 = rho(s1), rho(s2)
    mag = 1.0 + max(np.max(np.abs(s1)), np.max(np.abs(s2)), abs(cash))
    thresh = 2.0 * tol * mag * (1.0 + scale)
    cash_v = abs(rho(s1 + cash) - (r1 + cash))
    hom_v = abs(rho(scale * s1) - scale * r1) if scale > 0 else abs(r1 * 0.0)
    if np.all(s1 <= s2):
        monotone = bool(r1 <= r2 + thresh)
    elif np.all(s2 <= s1):
        monotone = bool(r2 <= r1 + thresh)
    else:
        monotone = None
    gap = rho(s1 + s2) - r1 - r2
    return AxiomReport(a, float(cash_v), float(hom_v), monotone, float(gap),
                       bool(gap <= thresh), float(thresh))


def find_subadditivity_counterexample(alpha, rng: np.random.Generator, trials: int = 1000,
                                      n: int = 2, tol: float = DEFAULT_TOL):
    """Random search for paired samples with ``rho(X1+X2) > rho(X1) + rho(X2)``.

    Returns ``(x1, x2, gap)`` for the first violation found, else ``None``.
    """
    for _ in range(trials):
        x1 = rng.uniform(-1.0, 1.0, size=n)
        x2 = rng.uniform(-1.0, 1.0, size=n)
        rep = check_axioms(x1, x2, alpha, tol=tol)
        if not rep.subadditive:
            return x1, x2, rep.subadditivity_gap
    return None
