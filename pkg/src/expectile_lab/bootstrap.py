"""Bootstrap laws of the empirical expectile.

Every scheme produces a weight vector ``W`` (nonnegative, summing to ``n``)
that turns the empirical cdf into ``F*(x) = (1/n) sum_i W_i 1[X_i <= x]``.
Replicates are ``sqrt(n) * (R(F*) - R(F_n))``.

Replicate ``b`` always draws from its own stream
``SeedSequence(seed, spawn_key=(b,))``, so a run is reproducible bit for bit
whatever the number of worker threads.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import stats

from .core import DEFAULT_TOL, ExpectileEstimate, expectile_empirical, expectile_weighted_batch
from .distributions import EmpiricalDistribution, as_alpha
from .errors import (
    DegenerateDraw,
    EmptyReplicates,
    InvalidBlockLength,
    InvalidScheme,
    NumericalError,
    TooFewReplicates,
    ValidationError,
    ZeroVariance,
)

__all__ = [
    "Efron",
    "Bayesian",
    "CircularBlock",
    "BootstrapScheme",
    "BootstrapDistribution",
    "ConfidenceInterval",
    "make_scheme",
    "efron_weights",
    "bayesian_weights",
    "circular_block_weights",
    "circular_block_weights_from_starts",
    "default_block_length",
    "replicate_rng",
    "bootstrap_distribution",
    "ci_from_bootstrap",
    "ks_distance",
]

_CHUNK = 64
_MAX_DRAWS = 100


def efron_weights(n: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial(n; 1/n, ..., 1/n) counts."""
    if n < 1:
        raise ValidationError("n must be positive")
    return np.bincount(rng.integers(0, n, size=n), minlength=n).astype(float)


def bayesian_weights(n: int, rng: np.random.Generator, weight_law=None) -> np.ndarray:
    """Normalised i.i.d. weights ``W_i = Y_i / mean(Y)``.

    Parameters
    ----------
    weight_law : frozen scipy.stats distribution, optional
        Law of the ``Y_i``; defaults to the unit exponential.

    Raises
    ------
    DegenerateDraw
        If 100 consecutive draws all have ``mean(Y) == 0``.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    law = stats.expon() if weight_law is None else weight_law
    for _ in range(_MAX_DRAWS):
        y = np.asarray(law.rvs(size=n, random_state=rng), dtype=float)
        ybar = y.mean()
        if ybar > 0:
            return y / ybar
    raise DegenerateDraw(f"weight law produced an all-zero draw {_MAX_DRAWS} times")


def _check_block(n: int, block_length: int):
    if block_length < 1 or block_length >= n or n % block_length:
        raise InvalidBlockLength(
            f"block length must divide n and be smaller than n (n={n}, block={block_length})")


def circular_block_weights_from_starts(n: int, block_length: int, starts) -> np.ndarray:
    """Coverage counts of wrapped blocks ``{s, ..., s+l-1} mod n`` (1-based starts)."""
    _check_block(n, block_length)
    s = np.asarray(starts, dtype=np.int64)
    if np.any((s < 1) | (s > n)):
        raise ValidationError("block starts must lie in 1..n")
    idx = (s[:, None] - 1 + np.arange(block_length)) % n
    return np.bincount(idx.ravel(), minlength=n).astype(float)


def circular_block_weights(n: int, block_length: int, rng: np.random.Generator) -> np.ndarray:
    """Circular block weights: ``n / block_length`` uniform starts, wrapped at ``n``."""
    _check_block(n, block_length)
    starts = rng.integers(1, n + 1, size=n // block_length)
    return circular_block_weights_from_starts(n, block_length, starts)


def default_block_length(n: int) -> int:
    """Largest divisor of ``n`` not exceeding ``n ** (1/3)``."""
    if n < 2:
        raise InvalidBlockLength("circular block bootstrap needs n >= 2")
    best = 1
    d = 1
    while d ** 3 <= n:
        if n % d == 0:
            best = d
        d += 1
    return best


@dataclass(frozen=True)
class Efron:
    name = "efron"

    def validate(self, n: int):
        pass

    def weights(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return efron_weights(n, rng)

    def describe(self) -> dict:
        return {"scheme": self.name}


@dataclass(frozen=True)
class Bayesian:
    """Bayesian bootstrap with weight law ``law`` (standard deviation equal to mean)."""

    law: object = None
    name = "bayesian"

    def __post_init__(self):
        if self.law is None:
            object.__setattr__(self, "law", stats.expon())
        law = self.law
        try:
            mean, sd, lower = float(law.mean()), float(law.std()), float(law.support()[0])
        except AttributeError as exc:
            raise InvalidScheme("weight law must be a frozen scipy.stats distribution") from exc
        if not (mean > 0 and math.isfinite(mean)):
            raise InvalidScheme("weight law needs a finite positive mean")
        if abs(sd - mean) > 1e-9 * mean:
            raise InvalidScheme(f"weight law needs sd == mean, got sd={sd!r}, mean={mean!r}")
        if lower < 0:
            raise InvalidScheme("weight law must be supported on [0, inf)")

    def validate(self, n: int):
        pass

    def weights(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return bayesian_weights(n, rng, self.law)

    def describe(self) -> dict:
        dist = self.law.dist
        return {"scheme": self.name, "law": dist.name,
                "law_args": list(self.law.args), "law_kwds": dict(self.law.kwds)}


@dataclass(frozen=True)
class CircularBlock:
    block_length: Optional[int] = None
    name = "circular"

    def __post_init__(self):
        if self.block_length is not None and int(self.block_length) < 1:
            raise InvalidBlockLength("block length must be positive")

    def length_for(self, n: int) -> int:
        return default_block_length(n) if self.block_length is None else int(self.block_length)

    def validate(self, n: int):
        _check_block(n, self.length_for(n))

    def weights(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return circular_block_weights(n, self.length_for(n), rng)

    def describe(self) -> dict:
        return {"scheme": self.name, "block_length": self.block_length}


BootstrapScheme = Union[Efron, Bayesian, CircularBlock]


def make_scheme(name: str, block_length: Optional[int] = None) -> BootstrapScheme:
    key = name.lower()
    if key == "efron":
        return Efron()
    if key in ("bayes", "bayesian"):
        return Bayesian()
    if key in ("circular", "block", "circular_block"):
        return CircularBlock(block_length)
    raise InvalidScheme(f"unknown bootstrap scheme {name!r}")


def replicate_rng(seed: int, b: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(b),)))


@dataclass(frozen=True)
class BootstrapDistribution:
    """Replicates of ``sqrt(n) * (R(F*) - R(F_n))``."""

    replicates: np.ndarray
    alpha: float
    scheme: BootstrapScheme
    base_estimate: ExpectileEstimate
    seed: int = 0

    @property
    def B(self) -> int:
        return int(self.replicates.size)

    @property
    def n(self) -> int:
        return int(self.base_estimate.n)

    def variance(self) -> float:
        return float(np.var(self.replicates))

    def summary(self) -> dict:
        r = self.replicates
        return {
            "B": self.B,
            "mean": float(r.mean()),
            "sd": float(r.std()),
            "quantiles": {str(p): float(np.quantile(r, p)) for p in (0.025, 0.25, 0.5, 0.75, 0.975)},
        }


def bootstrap_distribution(dist: EmpiricalDistribution, alpha, scheme: BootstrapScheme, B: int,
                           seed: int = 0, workers: int = 1,
                           tol: float = DEFAULT_TOL) -> BootstrapDistribution:
    """Draw ``B`` bootstrap replicates of the scaled expectile error.

    Parameters
    ----------
    dist : EmpiricalDistribution
        Unweighted sample; time order is used by the block scheme.
    alpha : float
    scheme : Efron, Bayesian or CircularBlock
    B : int
    seed : int
    workers : int
        Threads used for chunks of replicates; has no effect on the result.

    Raises
    ------
    NumericalError
        If any replicate is not finite (the run is aborted, never pruned).
    """
    a = as_alpha(alpha)
    if B < 1:
        raise ValidationError("B must be positive")
    if not dist.is_uniform:
        raise ValidationError("bootstrap expects an unweighted sample")
    if workers < 1:
        raise ValidationError("workers must be positive")
    n = dist.n
    scheme.validate(n)
    base = expectile_empirical(dist, a, tol)
    points, order = dist.points, dist.sort_order
    root_n = math.sqrt(n)

    def run(lo: int) -> np.ndarray:
        hi = min(lo + _CHUNK, B)
        W = np.stack([scheme.weights(n, replicate_rng(seed, b)) for b in range(lo, hi)])
        m = expectile_weighted_batch(points, W[:, order], a)
        return root_n * (m - base.value)

    starts = range(0, B, _CHUNK)
    if workers == 1:
        parts = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    reps = np.concatenate(parts)
    if not np.all(np.isfinite(reps)):
        raise NumericalError("non-finite bootstrap replicate")
    reps.setflags(write=False)
    return BootstrapDistribution(reps, a, scheme, base, int(seed))


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float
    kind: str

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def ci_from_bootstrap(bd: BootstrapDistribution, level: float = 0.95,
                      kind: str = "percentile") -> ConfidenceInterval:
    """Percentile or basic (reflected) interval for the expectile.

    With ``q_lo, q_hi`` the ``(1 -/+ level)/2`` quantiles of the replicates,
    percentile is ``R + [q_lo, q_hi]/sqrt(n)`` and basic is
    ``R - [q_hi, q_lo]/sqrt(n)``.
    """
    if not 0.0 < level < 1.0:
        raise ValidationError("level must lie in (0, 1)")
    if bd.B < 20:
        raise TooFewReplicates(f"need at least 20 replicates, got {bd.B}")
    q_lo, q_hi = np.quantile(bd.replicates, [(1.0 - level) / 2.0, (1.0 + level) / 2.0])
    r, s = bd.base_estimate.value, math.sqrt(bd.n)
    if kind == "percentile":
        lo, hi = r + q_lo / s, r + q_hi / s
    elif kind == "basic":
        lo, hi = r - q_hi / s, r - q_lo / s
    else:
        raise ValidationError(f"unknown interval kind {kind!r}")
    return ConfidenceInterval(float(lo), float(hi), level, kind)


def ks_distance(replicates, s2: float) -> float:
    """Kolmogorov distance between the replicates and ``N(0, s2)``."""
    r = np.asarray(replicates, dtype=float).ravel()
    if r.size == 0:
        raise EmptyReplicates("no replicates")
    if not s2 > 0:
        raise ZeroVariance(f"limit variance must be positive, got {s2!r}")
    return float(stats.kstest(r, stats.norm(0.0, math.sqrt(s2)).cdf).statistic)
