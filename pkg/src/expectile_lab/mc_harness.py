"""Monte Carlo experiments for the expectile estimators.

Each experiment is a pure function of its arguments and ``seed``: replicate
``r`` draws from ``SeedSequence(seed, spawn_key=(r,))`` and results are
gathered in replicate order, so reports are bit-identical across worker
counts. Runtimes are kept out of the deterministic payload.

The AR(1) generator is geometrically mixing for ``|phi| < 1``; the
dependence conditions of the limit theory are assumed on that basis and not
estimated.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, signal, special, stats

from .asymptotics import iid_variance_model
from .bootstrap import (
    Bayesian,
    CircularBlock,
    Efron,
    bootstrap_distribution,
    ci_from_bootstrap,
    replicate_rng,
)
from .core import avar, expectile_empirical, expectile_model, u_score, var_quantile
from .distributions import DistributionModel, EmpiricalDistribution, NormalModel, TwoPointModel, as_alpha
from .errors import ConfigError, DegenerateGenerator, ValidationError
from .parametric import (
    LogNormalModel,
    LogNormalParams,
    ParetoModel,
    ParetoParams,
    delta_method_ci,
    hill_estimator,
    lognormal_asym_variance,
    lognormal_mle,
    model_for,
    numerical_delta_variance,
    pareto_asym_variance,
    pareto_mle,
)

__all__ = [
    "KS_CRITICAL_1PCT",
    "KS_SLACK",
    "IIDNormal",
    "IIDLogNormal",
    "IIDPareto",
    "IIDTwoPoint",
    "IIDConstant",
    "AR1",
    "ExperimentReport",
    "make_generator",
    "generate",
    "ks_threshold",
    "consistency_experiment",
    "normality_experiment",
    "coverage_experiment",
    "robustness_experiment",
    "comparison_table",
    "parametric_experiment",
]

KS_CRITICAL_1PCT = 1.628
KS_SLACK = 1.5
TRUTH_TOL = 1e-12


def ks_threshold(reps: int) -> float:
    """Harness pass threshold: ``1.5 * 1.628 / sqrt(reps)``."""
    return KS_SLACK * KS_CRITICAL_1PCT / math.sqrt(reps)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def _sub_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)).generate_state(1)[0])


class _IIDGenerator:
    """I.i.d. draws from an analytic marginal."""

    def model(self) -> DistributionModel:
        raise NotImplementedError

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(self.model().sample(n, rng), dtype=float)

    def true_expectile(self, alpha) -> float:
        return expectile_model(self.model(), alpha, TRUTH_TOL).value

    def true_variance(self, alpha) -> float:
        return iid_variance_model(self.model(), alpha, TRUTH_TOL)

    def naive_variance(self, alpha) -> float:
        return self.true_variance(alpha)

    def scale(self) -> float:
        m = self.model()
        up, lo = m.partial_second_moments(m.mean)
        return math.sqrt(up + lo)


@dataclass(frozen=True)
class IIDNormal(_IIDGenerator):
    m: float = 0.0
    s2: float = 1.0
    kind = "normal"

    def model(self):
        return NormalModel(self.m, math.sqrt(self.s2))

    def true_variance(self, alpha):
        # closed form E[U^2]/d^2 for the normal
        a = as_alpha(alpha)
        r = self.true_expectile(a)
        s = math.sqrt(self.s2)
        z = (r - self.m) / s
        Phi, phi = special.ndtr(z), stats.norm.pdf(z)
        lo = self.s2 * ((z * z + 1.0) * Phi + z * phi)
        up = self.s2 * ((z * z + 1.0) * (1.0 - Phi) - z * phi)
        d = (1.0 - 2.0 * a) * Phi + a
        return (a * a * up + (1.0 - a) ** 2 * lo) / d ** 2

    def scale(self):
        return math.sqrt(self.s2)

    def describe(self):
        return {"kind": self.kind, "m": self.m, "s2": self.s2}


@dataclass(frozen=True)
class IIDLogNormal(_IIDGenerator):
    m: float = 0.0
    s2: float = 1.0
    kind = "lognormal"

    def model(self):
        return LogNormalModel(LogNormalParams(self.m, self.s2))

    def scale(self):
        return math.sqrt((math.exp(self.s2) - 1.0) * math.exp(2.0 * self.m + self.s2))

    def describe(self):
        return {"kind": self.kind, "m": self.m, "s2": self.s2}


@dataclass(frozen=True)
class IIDPareto(_IIDGenerator):
    a: float = 3.0
    c_bar: float = 1.0
    kind = "pareto"

    def model(self):
        return ParetoModel(ParetoParams(self.a, self.c_bar))

    def scale(self):
        if self.a > 2:
            return self.c_bar * math.sqrt(self.a / ((self.a - 1.0) ** 2 * (self.a - 2.0)))
        return self.model().mean

    def describe(self):
        return {"kind": self.kind, "a": self.a, "c_bar": self.c_bar}


@dataclass(frozen=True)
class IIDTwoPoint(_IIDGenerator):
    """``P(X = x1) = p``, ``P(X = x0) = 1 - p``."""

    p: float = 0.5
    x0: float = 0.0
    x1: float = 1.0
    kind = "twopoint"

    def model(self):
        return TwoPointModel(self.p, self.x0, self.x1)

    def sample(self, n, rng):
        return np.where(rng.random(n) < self.p, self.x1, self.x0)

    def true_expectile(self, alpha):
        a = as_alpha(alpha)
        up, lo = a * self.p, (1.0 - a) * (1.0 - self.p)
        return (up * self.x1 + lo * self.x0) / (up + lo)

    def true_variance(self, alpha):
        a = as_alpha(alpha)
        r = self.true_expectile(a)
        u1, u0 = a * (self.x1 - r), (1.0 - a) * (self.x0 - r)
        d = (1.0 - 2.0 * a) * (1.0 - self.p) + a
        return (self.p * u1 * u1 + (1.0 - self.p) * u0 * u0) / d ** 2

    def scale(self):
        return abs(self.x1 - self.x0) * math.sqrt(self.p * (1.0 - self.p))

    def describe(self):
        return {"kind": self.kind, "p": self.p, "x0": self.x0, "x1": self.x1}


@dataclass(frozen=True)
class IIDConstant(_IIDGenerator):
    c: float = 0.0
    kind = "constant"

    def model(self):
        return TwoPointModel(1.0, self.c, self.c)

    def sample(self, n, rng):
        return np.full(n, float(self.c))

    def true_expectile(self, alpha):
        as_alpha(alpha)
        return float(self.c)

    def true_variance(self, alpha):
        return 0.0

    def scale(self):
        return 0.0

    def describe(self):
        return {"kind": self.kind, "c": self.c}


@dataclass(frozen=True)
class AR1:
    """``X_t = phi X_{t-1} + e_t`` with ``e_t ~ N(0, innovation_sd^2)``.

    Recording starts after ``burn_in`` steps from ``X = 0``.
    """

    phi: float = 0.5
    innovation_sd: float = 1.0
    burn_in: int = 1000
    kind = "ar1"

    def __post_init__(self):
        if not -1.0 < self.phi < 1.0:
            raise ValidationError("AR(1) needs |phi| < 1")
        if not self.innovation_sd > 0:
            raise ValidationError("innovation_sd must be positive")

    @property
    def marginal_sd(self) -> float:
        return self.innovation_sd / math.sqrt(1.0 - self.phi ** 2)

    def model(self) -> DistributionModel:
        return NormalModel(0.0, self.marginal_sd)

    def sample(self, n, rng):
        e = rng.normal(0.0, self.innovation_sd, size=n + self.burn_in)
        return signal.lfilter([1.0], [1.0, -self.phi], e)[self.burn_in:]

    def true_expectile(self, alpha):
        return IIDNormal(0.0, self.marginal_sd ** 2).true_expectile(alpha)

    def naive_variance(self, alpha):
        return IIDNormal(0.0, self.marginal_sd ** 2).true_variance(alpha)

    def true_variance(self, alpha, max_terms: int = 10_000) -> float:
        """Long-run variance ``sum_k Cov(Z_0, Z_k)`` of ``Z = U_alpha(X - R)/d``.

        ``E[U(X_k - R) | X_0 = x]`` is closed form (a normal with mean
        ``rho x``); the outer expectation is integrated by quadrature.
        """
        a = as_alpha(alpha)
        r = self.true_expectile(a)
        sd = self.marginal_sd
        d = (1.0 - 2.0 * a) * special.ndtr(r / sd) + a

        def cond_mean_u(x, rho):
            mu, s = rho * x, sd * math.sqrt(1.0 - rho * rho)
            z = (r - mu) / s
            upm = s * stats.norm.pdf(z) + (mu - r) * special.ndtr(-z)
            return (2.0 * a - 1.0) * upm - (1.0 - a) * (r - mu)

        def lag_cov(rho):
            f = lambda x: u_score(a, x - r) * cond_mean_u(x, rho) * stats.norm.pdf(x / sd) / sd
            lo = integrate.quad(f, -math.inf, r, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
            hi = integrate.quad(f, r, math.inf, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
            return lo + hi

        g0 = IIDNormal(0.0, sd * sd).true_variance(a) * d * d
        total = g0
        for k in range(1, max_terms):
            rho = self.phi ** k
            if abs(rho) < 1e-15:
                break
            total += 2.0 * lag_cov(rho)
        return total / d ** 2

    def scale(self):
        return self.marginal_sd

    def describe(self):
        return {"kind": self.kind, "phi": self.phi, "innovation_sd": self.innovation_sd,
                "burn_in": self.burn_in}


_GENERATORS = {
    "normal": IIDNormal,
    "lognormal": IIDLogNormal,
    "pareto": IIDPareto,
    "twopoint": IIDTwoPoint,
    "constant": IIDConstant,
    "ar1": AR1,
}


def make_generator(spec: dict):
    """Build a generator from ``{"kind": ..., **params}``."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in _GENERATORS:
        raise ConfigError(f"unknown generator kind {kind!r}; choose from {sorted(_GENERATORS)}")
    try:
        return _GENERATORS[kind](**spec)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for generator {kind!r}: {exc}") from exc


def generate(gen, n: int, seed: int) -> np.ndarray:
    """``n`` observations from ``gen``, deterministic in ``seed``."""
    if n < 1:
        raise ValidationError("n must be positive")
    return gen.sample(int(n), _rng(seed))


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seed: int
    statistics: dict
    passed: Optional[bool] = None
    tables: dict = field(default_factory=dict)
    runtime: float = 0.0

    def as_dict(self) -> dict:
        """Deterministic payload (runtime excluded)."""
        return {
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "statistics": self.statistics,
            "passed": self.passed,
        }


def _map_reps(fn: Callable[[int], object], reps: int, workers: int) -> list:
    if workers <= 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(reps)))


def _ks_normal(z) -> float:
    return float(stats.kstest(np.asarray(z, dtype=float), special.ndtr).statistic)


_FITTERS = {
    "lognormal_mle": lambda x, kw: lognormal_mle(x, **kw),
    "pareto_mle": lambda x, kw: pareto_mle(x, **kw),
    "hill": lambda x, kw: hill_estimator(x, **kw),
}


def consistency_experiment(gen, alpha, n_grid: Sequence[int], seed: int = 0,
                           estimator: str = "empirical", fit_kwargs: Optional[dict] = None) -> ExperimentReport:
    """Absolute error of the estimate along prefixes of one simulated path.

    Passes when the final error is below ``0.05 * scale`` and below the
    first error (ties allowed only when both are zero).
    """
    t0 = time.perf_counter()
    a = as_alpha(alpha)
    grid = [int(n) for n in n_grid]
    if not grid or any(n < 1 for n in grid) or any(b <= s for s, b in zip(grid, grid[1:])):
        raise ValidationError("n_grid must be a nonempty increasing list of positive sizes")
    truth = gen.true_expectile(a)
    path = generate(gen, grid[-1], seed)
    kw = fit_kwargs or {}
    errors = []
    for n in grid:
        x = path[:n]
        if estimator == "empirical":
            est = expectile_empirical(EmpiricalDistribution(x), a).value
        elif estimator in _FITTERS:
            fit = _FITTERS[estimator](x, kw)
            est = math.nan if fit.params is None else expectile_model(model_for(fit.params), a).value
        else:
            raise ValidationError(f"unknown estimator {estimator!r}")
        errors.append(abs(est - truth))
    scale = gen.scale()
    limit = 0.05 * (scale if scale > 0 else max(1.0, abs(truth)))
    first, last = errors[0], errors[-1]
    passed = bool(last < limit and (last < first or first == last == 0.0))
    rep = ExperimentReport(
        "consistency",
        {"generator": gen.describe(), "alpha": a, "n_grid": grid, "estimator": estimator},
        int(seed),
        {"truth": truth, "errors": errors, "scale": scale, "limit": limit},
        passed,
        {"trajectory": [{"n": n, "abs_error": e} for n, e in zip(grid, errors)]},
    )
    rep.runtime = time.perf_counter() - t0
    return rep


def normality_experiment(gen, alpha, n: int, reps: int, seed: int = 0,
                         workers: int = 1) -> ExperimentReport:
    """KS distance of ``sqrt(n)(R_hat - R)/s`` to ``N(0,1)`` over replicates.

    ``s^2`` is the generator's true limit variance (long-run for AR(1)).
    Dependent generators also report the KS distance under the naive i.i.d.
    variance.

    Raises
    ------
    DegenerateGenerator
        If the limit variance is zero.
    """
    t0 = time.perf_counter()
    a = as_alpha(alpha)
    if reps < 200:
        raise ValidationError("normality experiment needs reps >= 200")
    s2 = gen.true_variance(a)
    if not s2 > 0:
        raise DegenerateGenerator("limit variance is zero")
    truth = gen.true_expectile(a)
    root_n = math.sqrt(n)

    def one(r):
        x = gen.sample(n, replicate_rng(seed, r))
        return root_n * (expectile_empirical(EmpiricalDistribution(x), a).value - truth)

    err = np.array(_map_reps(one, reps, workers))
    ks = _ks_normal(err / math.sqrt(s2))
    thr = ks_threshold(reps)
    st = {"truth": truth, "s2": s2, "ks_distance": ks, "threshold": thr,
          "mc_variance": float(np.var(err))}
    naive = gen.naive_variance(a)
    if naive != s2:
        st["naive_s2"] = naive
        st["naive_ks_distance"] = _ks_normal(err / math.sqrt(naive))
    hist, edges = np.histogram(err / math.sqrt(s2), bins=40, range=(-4.0, 4.0))
    rep = ExperimentReport(
        "normality", {"generator": gen.describe(), "alpha": a, "n": n, "reps": reps},
        int(seed), st, bool(ks <= thr),
        {"histogram": [{"left": float(l), "right": float(r), "count": int(c)}
                       for l, r, c in zip(edges[:-1], edges[1:], hist)]},
    )
    rep.runtime = time.perf_counter() - t0
    return rep


def _scheme_from_name(name: str, block_length: Optional[int]):
    if name == "efron":
        return Efron()
    if name in ("bayes", "bayesian"):
        return Bayesian()
    if name == "circular":
        return CircularBlock(block_length)
    raise ValidationError(f"unknown method {name!r}")


def coverage_experiment(gen, alpha, n: int, reps: int, methods: Sequence[str] = ("efron",),
                        level: float = 0.95, seed: int = 0, B: int = 999,
                        block_length: Optional[int] = None, kind: str = "percentile",
                        family: Optional[str] = None, fit_kwargs: Optional[dict] = None,
                        workers: int = 1) -> ExperimentReport:
    """Empirical coverage of nominal-level intervals, all methods on the same data.

    ``methods`` holds bootstrap schemes (``efron``, ``bayesian``,
    ``circular``) and/or ``delta_method`` (which needs ``family`` in
    ``{"lognormal_mle", "pareto_mle", "hill"}``). Each method passes when its
    coverage lies in the exact binomial 99% band around ``level``.
    """
    t0 = time.perf_counter()
    a = as_alpha(alpha)
    if reps < 500:
        raise ValidationError("coverage experiment needs reps >= 500")
    if not 0.0 < level < 1.0:
        raise ValidationError("level must lie in (0, 1)")
    if not gen.scale() > 0:
        raise DegenerateGenerator("generator has no variability")
    methods = list(methods)
    schemes = {}
    for mth in methods:
        if mth == "delta_method":
            if family not in _FITTERS:
                raise ValidationError("delta_method needs family in lognormal_mle, pareto_mle, hill")
        else:
            schemes[mth] = _scheme_from_name(mth, block_length)
            schemes[mth].validate(n)
    truth = gen.true_expectile(a)
    kw = fit_kwargs or {}

    def one(r):
        x = gen.sample(n, replicate_rng(seed, r))
        dist = EmpiricalDistribution(x)
        hits = []
        for j, mth in enumerate(methods):
            if mth == "delta_method":
                ci = delta_method_ci(_FITTERS[family](x, kw), a, level)
            else:
                bd = bootstrap_distribution(dist, a, schemes[mth], B, seed=_sub_seed(seed, r, j + 1))
                ci = ci_from_bootstrap(bd, level, kind)
            hits.append(ci.contains(truth))
        return hits

    hits = np.array(_map_reps(one, reps, workers), dtype=bool).reshape(reps, len(methods))
    lo, hi = stats.binom.interval(0.99, reps, level)
    band = (float(lo) / reps, float(hi) / reps)
    cov = {m: float(hits[:, j].mean()) for j, m in enumerate(methods)}
    ok = {m: bool(band[0] <= c <= band[1]) for m, c in cov.items()}
    rep = ExperimentReport(
        "coverage",
        {"generator": gen.describe(), "alpha": a, "n": n, "reps": reps, "methods": methods,
         "level": level, "B": B, "block_length": block_length, "kind": kind, "family": family},
        int(seed),
        {"truth": truth, "coverage": cov, "band": list(band), "method_passed": ok},
        all(ok.values()),
        {"coverage": [{"method": m, "coverage": c, "band_lo": band[0], "band_hi": band[1]}
                      for m, c in cov.items()]},
    )
    rep.runtime = time.perf_counter() - t0
    return rep


def _functionals(a: float) -> dict:
    def ex(d):
        return expectile_empirical(d, a).value
    return {
        "expectile": ex,
        "var": lambda d: var_quantile(d, a),
        "avar": lambda d: avar(d, a),
        "median": lambda d: var_quantile(d, 0.5),
    }


def _contaminated_clouds(gen, a, n, reps, seed, eps_grid, outlier, workers):
    funcs = _functionals(a)

    def one(r):
        rng = replicate_rng(seed, r)
        x = gen.sample(n, rng)
        u = rng.random(n)
        out = []
        for eps in eps_grid:
            xe = np.where(u < eps, outlier, x)
            d = EmpiricalDistribution(xe)
            out.append([f(d) for f in funcs.values()])
        return out

    vals = np.array(_map_reps(one, reps, workers))  # (reps, eps, functional)
    return list(funcs), vals


def robustness_experiment(gen, alpha, eps_grid: Sequence[float] = (0.0, 0.005, 0.01, 0.02, 0.05),
                          outlier: float = 100.0, n: int = 500, reps: int = 200, seed: int = 0,
                          workers: int = 1) -> ExperimentReport:
    """Shift of the estimator law under ``eps``-contamination by a point mass.

    Contamination is nested with common random numbers: observation ``i`` is
    replaced by ``outlier`` when ``u_i < eps``. The shift is the two-sample
    KS distance between the clean and contaminated replicate clouds, a
    proxy for qualitative robustness with no pass/fail verdict.
    """
    t0 = time.perf_counter()
    a = as_alpha(alpha)
    eps = [float(e) for e in eps_grid]
    if not eps or any(not 0.0 <= e <= 0.5 for e in eps):
        raise ValidationError("contamination levels must lie in [0, 0.5]")
    if reps < 2:
        raise ValidationError("robustness experiment needs reps >= 2")
    grid = sorted(set([0.0] + eps))
    names, vals = _contaminated_clouds(gen, a, n, reps, seed, grid, outlier, workers)
    curves = {}
    rows = []
    for j, name in enumerate(names):
        clean = vals[:, 0, j]
        curve = []
        for i, e in enumerate(grid):
            cloud = vals[:, i, j]
            shift = 0.0 if np.array_equal(cloud, clean) else float(stats.ks_2samp(clean, cloud).statistic)
            curve.append(shift)
            rows.append({"functional": name, "eps": e, "shift": shift})
        curves[name] = curve
    st = {
        "eps": grid,
        "shift": curves,
        "nondecreasing": {k: bool(np.all(np.diff(v) >= 0)) for k, v in curves.items()},
        "note": "contamination proxy for qualitative robustness",
    }
    rep = ExperimentReport(
        "robustness",
        {"generator": gen.describe(), "alpha": a, "eps_grid": eps, "outlier": outlier,
         "n": n, "reps": reps},
        int(seed), st, None, {"shift_curve": rows},
    )
    rep.runtime = time.perf_counter() - t0
    return rep


def _true_avar(model: DistributionModel, a: float) -> float:
    pts = [float(model.cdf(b)) for b in model._breakpoints()]
    pts = sorted({p for p in pts if a < p < 1.0})
    val = integrate.quad(lambda s: float(model.quantile(s)), a, 1.0, points=pts or None, limit=400)[0]
    return val / (1.0 - a)


def comparison_table(gen, alpha, n: int, reps: int, seed: int = 0, eps: float = 0.01,
                     outlier: float = 100.0, workers: int = 1) -> ExperimentReport:
    """Value at risk, average value at risk and expectile side by side.

    Per functional: mean absolute error at ``n``, KS distance of the
    replicates standardised by their own mean and standard deviation, and
    the contamination shift at ``eps``.
    """
    t0 = time.perf_counter()
    a = as_alpha(alpha)
    if reps < 200:
        raise ValidationError("comparison table needs reps >= 200")
    model = gen.model()
    truth = {"var": float(model.quantile(a)), "avar": _true_avar(model, a),
             "expectile": gen.true_expectile(a)}
    names, vals = _contaminated_clouds(gen, a, n, reps, seed, [0.0, eps], outlier, workers)
    rows = []
    for key in ("var", "avar", "expectile"):
        j = names.index(key)
        clean, dirty = vals[:, 0, j], vals[:, 1, j]
        sd = float(np.std(clean))
        ks = _ks_normal((clean - clean.mean()) / sd) if sd > 0 else 1.0
        shift = 0.0 if np.array_equal(clean, dirty) else float(stats.ks_2samp(clean, dirty).statistic)
        rows.append({"functional": key, "truth": truth[key],
                     "mean_abs_error": float(np.mean(np.abs(clean - truth[key]))),
                     "normality_ks": ks, "contamination_shift": shift})
    thr = ks_threshold(reps)
    for r in rows:
        r["approximately_normal"] = bool(r["normality_ks"] <= thr)
    rep = ExperimentReport(
        "comparison",
        {"generator": gen.describe(), "alpha": a, "n": n, "reps": reps, "eps": eps, "outlier": outlier},
        int(seed), {"rows": rows, "threshold": thr}, None, {"comparison": rows},
    )
    rep.runtime = time.perf_counter() - t0
    return rep


def parametric_experiment(family: str, params, alpha, n: int, reps: int, seed: int = 0,
                          estimator: str = "mle", k: Optional[int] = None,
                          workers: int = 1) -> ExperimentReport:
    """Monte Carlo oracle for the parametric plug-in expectile.

    Reports ``n_eff * Var(R(F_theta_hat) - R(F_theta))`` against the closed
    form and the numerical delta method, the KS distance of the standardised
    expectile errors, and (Pareto) the KS distance of
    ``sqrt(n_eff)(a_hat - a)/a`` to ``N(0,1)``.
    """
    t0 = time.perf_counter()
    a_lvl = as_alpha(alpha)
    if reps < 2:
        raise ValidationError("parametric experiment needs reps >= 2")
    if family == "lognormal":
        p = params if isinstance(params, LogNormalParams) else LogNormalParams(**params)
        fit = lambda x: lognormal_mle(x)
        closed = {"s": lognormal_asym_variance(p, a_lvl, "s"), "2": lognormal_asym_variance(p, a_lvl, "2")}
        closed_default = closed["s"]
    elif family == "pareto":
        p = params if isinstance(params, ParetoParams) else ParetoParams(**params)
        if estimator == "hill":
            fit = lambda x: hill_estimator(x, k, p.c_bar)
        else:
            fit = lambda x: pareto_mle(x, p.c_bar)
        closed_default = pareto_asym_variance(p, a_lvl)
        closed = {"default": closed_default}
    else:
        raise ValidationError(f"unknown family {family!r}")
    model = model_for(p)
    truth = expectile_model(model, a_lvl, TRUTH_TOL).value

    def one(r):
        x = model.sample(n, replicate_rng(seed, r))
        est = fit(x)
        val = math.nan if est.params is None else expectile_model(model_for(est.params), a_lvl).value
        return val, est.raw[0], est.n_effective

    out = _map_reps(one, reps, workers)
    vals = np.array([o[0] for o in out])
    raw = np.array([o[1] for o in out])
    n_eff = out[0][2]
    ok = np.isfinite(vals)
    err = math.sqrt(n_eff) * (vals[ok] - truth)
    mc_var = float(np.var(err))
    st = {
        "truth": truth,
        "n_effective": n_eff,
        "mc_variance": mc_var,
        "closed_form_variance": closed,
        "numerical_delta_variance": numerical_delta_variance(p, a_lvl),
        "relative_error": {k_: abs(v - mc_var) / mc_var for k_, v in closed.items()},
        "expectile_ks": _ks_normal(err / math.sqrt(closed_default)),
        "invalid_fits": int((~ok).sum()),
        "threshold": ks_threshold(reps),
    }
    if family == "pareto":
        st["tail_index_ks"] = _ks_normal(math.sqrt(n_eff) * (raw - p.a) / p.a)
    rep = ExperimentReport(
        "parametric",
        {"family": family, "params": dict(p.__dict__), "alpha": a_lvl, "n": n, "reps": reps,
         "estimator": estimator, "k": k},
        int(seed), st, bool(st["relative_error"].get("s", st["relative_error"].get("default")) <= 0.10),
    )
    rep.runtime = time.perf_counter() - t0
    return rep
