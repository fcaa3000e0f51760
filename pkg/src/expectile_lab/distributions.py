"""Distribution objects consumed by the estimators.

Two kinds of distribution are supported. :class:`EmpiricalDistribution` is a
(possibly weighted) step cdf built from observations; bootstrap resamples are
just reweightings of it. :class:`DistributionModel` subclasses are analytic
families that expose a cdf, the mean, and the upper partial moment
``E[(X - t)^+]``, which is all the root-finder needs.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special

from .errors import InvalidAlpha, InvalidWeights, ValidationError

__all__ = [
    "AlphaLevel",
    "as_alpha",
    "EmpiricalDistribution",
    "DistributionModel",
    "NormalModel",
    "TwoPointModel",
    "MixtureModel",
]


@dataclass(frozen=True)
class AlphaLevel:
    """Expectile level, strictly inside (0, 1)."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a < 1.0) or math.isnan(a):
            raise InvalidAlpha(f"alpha must lie in the open interval (0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    def __float__(self):
        return self.alpha


def as_alpha(alpha) -> float:
    """Validate ``alpha`` (float or :class:`AlphaLevel`) and return it as a float."""
    if isinstance(alpha, AlphaLevel):
        return alpha.alpha
    return AlphaLevel(alpha).alpha


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class EmpiricalDistribution:
    """Weighted empirical distribution function.

    ``F(x) = (1/n) * sum_i w_i * 1[x_i <= x]`` with nonnegative weights that
    sum to ``n``. Unit weights give the ordinary empirical cdf.

    The observations are kept in the order they were supplied (time order
    matters for block bootstraps and long-run variances); a sorted copy backs
    the cdf and the solvers.

    Parameters
    ----------
    values : array_like
        Observations, in time order.
    weights : array_like, optional
        Nonnegative weights aligned with ``values``; must sum to ``len(values)``
        within ``1e-9 * n``. Defaults to all ones.
    """

    __slots__ = ("_obs", "_obs_w", "_points", "_weights", "_order", "_n", "_uniform")

    def __init__(self, values, weights=None):
        x = np.array(values, dtype=float).ravel()
        n = x.size
        if n < 1:
            raise ValidationError("an empirical distribution needs at least one observation")
        if not np.all(np.isfinite(x)):
            raise ValidationError("observations must be finite")
        if weights is None:
            w = np.ones(n)
            uniform = True
        else:
            w = np.array(weights, dtype=float).ravel()
            if w.size != n:
                raise InvalidWeights(f"got {w.size} weights for {n} observations")
            if not np.all(np.isfinite(w)) or np.any(w < 0):
                raise InvalidWeights("weights must be finite and nonnegative")
            if abs(w.sum() - n) > 1e-9 * n:
                raise InvalidWeights(f"weights must sum to n={n}, got {w.sum()!r}")
            uniform = bool(np.all(w == 1.0))
        order = np.argsort(x, kind="stable")
        self._n = n
        self._uniform = uniform
        self._obs = _readonly(x)
        self._obs_w = _readonly(w)
        self._order = _readonly(order)
        self._points = _readonly(x[order])
        self._weights = _readonly(w[order])

    def __repr__(self):
        return f"EmpiricalDistribution(n={self._n}, uniform={self._uniform})"

    @property
    def n(self) -> int:
        return self._n

    @property
    def points(self) -> np.ndarray:
        """Sorted support points."""
        return self._points

    @property
    def weights(self) -> np.ndarray:
        """Weights aligned with :attr:`points`."""
        return self._weights

    @property
    def observations(self) -> np.ndarray:
        """Observations in the original (time) order."""
        return self._obs

    @property
    def observation_weights(self) -> np.ndarray:
        return self._obs_w

    @property
    def sort_order(self) -> np.ndarray:
        """Permutation taking :attr:`observations` to :attr:`points`."""
        return self._order

    @property
    def is_uniform(self) -> bool:
        return self._uniform

    @property
    def mean(self) -> float:
        return float(np.dot(self._weights, self._points) / self._n)

    def reweighted(self, weights) -> "EmpiricalDistribution":
        """Same observations, new weights (given in observation order)."""
        return EmpiricalDistribution(self._obs, weights)

    def shifted(self, c: float) -> "EmpiricalDistribution":
        return EmpiricalDistribution(self._obs + c, self._obs_w)

    def scaled(self, c: float) -> "EmpiricalDistribution":
        return EmpiricalDistribution(self._obs * c, self._obs_w)

    def cdf(self, x):
        """Right-continuous weighted cdf."""
        cw = np.concatenate(([0.0], np.cumsum(self._weights)))
        idx = np.searchsorted(self._points, x, side="right")
        out = cw[idx] / self._n
        return np.minimum(out, 1.0) if np.ndim(out) else float(min(out, 1.0))

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def upper_partial_moment(self, t: float) -> float:
        """``E[(X - t)^+]`` under the weighted empirical law."""
        return float(np.dot(self._weights, np.maximum(self._points - t, 0.0)) / self._n)

    def lower_partial_moment(self, t: float) -> float:
        return float(np.dot(self._weights, np.maximum(t - self._points, 0.0)) / self._n)

    def partial_second_moments(self, t: float) -> tuple[float, float]:
        d = self._points - t
        up = np.dot(self._weights, np.maximum(d, 0.0) ** 2) / self._n
        lo = np.dot(self._weights, np.maximum(-d, 0.0) ** 2) / self._n
        return float(up), float(lo)

    def quantile(self, p):
        """Left-continuous inverse ``inf{x : F(x) >= p}``."""
        cw = np.cumsum(self._weights)
        target = np.asarray(p, dtype=float) * self._n
        # tolerance absorbs rounding in the cumulative weights
        idx = np.searchsorted(cw, target - 1e-12 * self._n, side="left")
        idx = np.clip(idx, 0, self._n - 1)
        out = self._points[idx]
        return out if np.ndim(out) else float(out)

    def support(self) -> tuple[float, float]:
        return float(self._points[0]), float(self._points[-1])


class DistributionModel(ABC):
    """Analytic distribution with finite mean.

    Subclasses implement :meth:`cdf`, :attr:`mean`, :meth:`quantile` and
    :meth:`sample`. The default :meth:`upper_partial_moment` integrates the
    survival function numerically; families with a closed form override it.
    """

    family: str = "model"

    @abstractmethod
    def cdf(self, x): ...

    @property
    @abstractmethod
    def mean(self) -> float: ...

    @abstractmethod
    def quantile(self, p): ...

    @abstractmethod
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray: ...

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"family": self.family, **self.params()}

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def support(self) -> tuple[float, float]:
        return -math.inf, math.inf

    def _breakpoints(self) -> list[float]:
        qs = [1e-9, 1e-6, 1e-3, 0.05, 0.25, 0.5, 0.75, 0.95, 0.999, 1 - 1e-6, 1 - 1e-9]
        pts = sorted({float(self.quantile(q)) for q in qs})
        return [p for p in pts if math.isfinite(p)]

    def upper_partial_moment(self, t: float) -> float:
        """``E[(X - t)^+] = int_t^inf (1 - F)`` by adaptive quadrature."""
        return quad_upper_partial_moment(self, t)

    def lower_partial_moment(self, t: float) -> float:
        """``E[(t - X)^+]``, via ``E[(t-X)^+] = t - E[X] + E[(X-t)^+]``."""
        return t - self.mean + self.upper_partial_moment(t)

    def partial_second_moments(self, t: float) -> tuple[float, float]:
        """``(E[((X-t)^+)^2], E[((t-X)^+)^2])`` by quadrature."""
        lo_s, hi_s = self.support()
        pts = self._breakpoints()
        up = 2.0 * _piecewise_quad(lambda x: (x - t) * self.survival(x), max(t, lo_s), math.inf, pts)
        lo = 2.0 * _piecewise_quad(lambda x: (t - x) * self.cdf(x), -math.inf, min(t, hi_s), pts)
        return up, lo


def _piecewise_quad(f, a: float, b: float, points: Sequence[float]) -> float:
    if not a < b:
        return 0.0
    inner = [p for p in points if a < p < b]
    knots = [a, *inner, b]
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        val, _ = integrate.quad(f, lo, hi, limit=200, epsabs=1e-14, epsrel=1e-12)
        total += val
    return total


def quad_upper_partial_moment(model: DistributionModel, t: float) -> float:
    """Quadrature ``int_t^inf S(x) dx`` for any model (used as an oracle, too)."""
    lo_s, _ = model.support()
    if t < lo_s or (lo_s >= 0 and t <= 0):
        return model.mean - t
    if lo_s >= 0:
        # positive support: x = e^y turns polynomial tails into exponential ones
        logs = [math.log(p) for p in model._breakpoints() if p > 0]

        def integrand(y):
            if y > 700.0:
                return 0.0
            x = math.exp(y)
            return float(model.survival(x)) * x

        return _piecewise_quad(integrand, math.log(t), math.inf, logs)
    return _piecewise_quad(model.survival, t, math.inf, model._breakpoints())


class NormalModel(DistributionModel):
    family = "normal"

    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        if not sigma > 0:
            raise ValidationError("sigma must be positive")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def __repr__(self):
        return f"NormalModel(mu={self.mu}, sigma={self.sigma})"

    def params(self):
        return {"mu": self.mu, "sigma": self.sigma}

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mu) / self.sigma)

    def survival(self, x):
        return special.ndtr((self.mu - np.asarray(x, dtype=float)) / self.sigma)

    @property
    def mean(self):
        return self.mu

    def quantile(self, p):
        return self.mu + self.sigma * special.ndtri(p)

    def sample(self, n, rng):
        return rng.normal(self.mu, self.sigma, size=n)

    def upper_partial_moment(self, t):
        z = (t - self.mu) / self.sigma
        return float(self.sigma * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
                     + (self.mu - t) * special.ndtr(-z))


class TwoPointModel(DistributionModel):
    """``P(X = x1) = p``, ``P(X = x0) = 1 - p``."""

    family = "twopoint"

    def __init__(self, p: float = 0.5, x0: float = 0.0, x1: float = 1.0):
        if not 0.0 <= p <= 1.0:
            raise ValidationError("p must lie in [0, 1]")
        if x1 < x0:
            raise ValidationError("need x0 <= x1")
        self.p = float(p)
        self.x0 = float(x0)
        self.x1 = float(x1)

    def __repr__(self):
        return f"TwoPointModel(p={self.p}, x0={self.x0}, x1={self.x1})"

    def params(self):
        return {"p": self.p, "x0": self.x0, "x1": self.x1}

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return (1 - self.p) * (x >= self.x0) + self.p * (x >= self.x1)

    @property
    def mean(self):
        return (1 - self.p) * self.x0 + self.p * self.x1

    def quantile(self, p):
        return np.where(np.asarray(p) <= 1 - self.p, self.x0, self.x1)

    def support(self):
        return self.x0, self.x1

    def _breakpoints(self):
        return [self.x0, self.x1]

    def sample(self, n, rng):
        return np.where(rng.random(n) < self.p, self.x1, self.x0)

    def upper_partial_moment(self, t):
        return (1 - self.p) * max(self.x0 - t, 0.0) + self.p * max(self.x1 - t, 0.0)

    def partial_second_moments(self, t):
        up = (1 - self.p) * max(self.x0 - t, 0.0) ** 2 + self.p * max(self.x1 - t, 0.0) ** 2
        lo = (1 - self.p) * max(t - self.x0, 0.0) ** 2 + self.p * max(t - self.x1, 0.0) ** 2
        return up, lo


class MixtureModel(DistributionModel):
    """Finite mixture ``sum_j w_j F_j``; partial moments mix linearly."""

    family = "mixture"

    def __init__(self, components: Sequence[DistributionModel], weights: Sequence[float]):
        w = np.asarray(weights, dtype=float)
        if len(components) != w.size or w.size == 0:
            raise ValidationError("one weight per component required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("mixture weights must be nonnegative and sum to 1")
        self.components = list(components)
        self.mix_weights = w

    def params(self):
        return {
            "components": [c.describe() for c in self.components],
            "weights": self.mix_weights.tolist(),
        }

    def cdf(self, x):
        return sum(w * c.cdf(x) for w, c in zip(self.mix_weights, self.components))

    def survival(self, x):
        return sum(w * c.survival(x) for w, c in zip(self.mix_weights, self.components))

    @property
    def mean(self):
        return float(sum(w * c.mean for w, c in zip(self.mix_weights, self.components)))

    def support(self):
        sup = [c.support() for c in self.components]
        return min(s[0] for s in sup), max(s[1] for s in sup)

    def _breakpoints(self):
        return sorted({p for c in self.components for p in c._breakpoints()})

    def quantile(self, p):
        def one(q):
            pts = self._breakpoints()
            lo, hi = pts[0] - 1.0, pts[-1] + 1.0
            while self.cdf(lo) > q:
                lo -= 2 * (hi - lo)
            while self.cdf(hi) < q:
                hi += 2 * (hi - lo)
            return optimize.brentq(lambda x: self.cdf(x) - q, lo, hi, xtol=1e-13)

        return np.vectorize(one)(p) if np.ndim(p) else one(float(p))

    def sample(self, n, rng):
        which = rng.choice(len(self.components), size=n, p=self.mix_weights)
        out = np.empty(n)
        for j, c in enumerate(self.components):
            mask = which == j
            out[mask] = c.sample(int(mask.sum()), rng)
        return out

    def upper_partial_moment(self, t):
        return float(sum(w * c.upper_partial_moment(t) for w, c in zip(self.mix_weights, self.components)))

    def partial_second_moments(self, t):
        up = lo = 0.0
        for w, c in zip(self.mix_weights, self.components):
            u, l = c.partial_second_moments(t)
            up += w * u
            lo += w * l
        return up, lo
