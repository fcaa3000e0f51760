import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate, stats

from expectile_lab.core import expectile_model
from expectile_lab.distributions import quad_upper_partial_moment
from expectile_lab.errors import DomainError, KTooLarge, OutsideParameterSpace, ZeroVariance
from expectile_lab.parametric import (
    LogNormalModel,
    LogNormalParams,
    ParetoModel,
    ParetoParams,
    delta_method_ci,
    hill_estimator,
    lognormal_asym_variance,
    lognormal_expectile,
    lognormal_hadamard_derivative,
    lognormal_mle,
    lognormal_partial_moment,
    numerical_delta_variance,
    pareto_asym_variance,
    pareto_expectile,
    pareto_hadamard_derivative,
    pareto_mle,
    pareto_partial_moment,
)

LN = LogNormalParams(0.0, 1.0)
PAR = ParetoParams(3.0, 1.0)


class TestEstimators:
    def test_lognormal_mle_formula(self):
        est = lognormal_mle([math.e, math.e ** 3])
        assert_allclose([est.params.m, est.params.s2], [2.0, 1.0])
        assert_allclose(est.asym_cov, np.diag([1.0, 2.0]))

    def test_lognormal_fallback(self):
        est = lognormal_mle([1.0, -1.0, 2.0], fallback_m=0.3, fallback_s2=0.7)
        assert (est.params.m, est.params.s2) == (0.3, 0.7)
        assert "fallback" in est.flags

    def test_lognormal_zero_variance(self):
        est = lognormal_mle([2.0, 2.0])
        assert est.params.m == pytest.approx(math.log(2.0))
        assert est.params.s2 == 1e-12 and "zero_variance" in est.flags
        with pytest.raises(ZeroVariance):
            delta_method_ci(est, 0.5)

    def test_pareto_mle(self):
        x = np.exp([0.2, 0.8])  # mean log-excess 0.5
        assert_allclose(pareto_mle(x, 1.0).params.a, 2.0)
        est = pareto_mle([0.5, 3.0], 1.0, fallback_a=4.0)
        assert est.params.a == 4.0 and "fallback" in est.flags
        est = pareto_mle([math.e] * 4, 1.0)
        assert est.raw[0] == pytest.approx(1.0) and est.params is None
        assert "outside_parameter_space" in est.flags
        with pytest.raises(OutsideParameterSpace):
            delta_method_ci(est, 0.5)

    def test_hill_one_term(self):
        x = np.array([1.5, 7.0, 2.0, 3.0])
        est = hill_estimator(x, 1, c_bar=1.0)
        assert_allclose(est.params.a, 1.0 / (math.log(7.0) - math.log(3.0)))
        assert est.n_effective == 1

    def test_hill_guard(self):
        x = np.array([0.5, 7.0, 2.0, 3.0])
        assert "fallback" in hill_estimator(x, 2, c_bar=1.0, fallback_a=5.0).flags

    def test_hill_k_range(self):
        with pytest.raises(KTooLarge):
            hill_estimator([2.0, 3.0, 4.0], 3)
        with pytest.raises(KTooLarge):
            hill_estimator([2.0, 3.0, 4.0], 0)

    def test_hill_on_exact_pareto_quantiles(self):
        n = 100_000
        x = PAR.c_bar * (1.0 - (np.arange(n) + 0.5) / n) ** (-1.0 / PAR.a)
        est = hill_estimator(x)
        assert abs(est.params.a - 3.0) / 3.0 < 0.10
        assert est.n_effective == int(n ** 0.4)

    def test_mle_consistency_along_path(self):
        rng = np.random.default_rng(0)
        x = LogNormalModel(LN).sample(200_000, rng)
        truth = lognormal_expectile(LN, 0.9).value
        errs = [abs(lognormal_expectile(lognormal_mle(x[:n]).params, 0.9).value - truth)
                for n in (100, 2000, 200_000)]
        assert errs[-1] < errs[0] and errs[-1] < 0.02


class TestPartialMoments:
    @pytest.mark.parametrize("p", [LN, LogNormalParams(1.0, 0.3), LogNormalParams(-0.5, 2.0)])
    def test_lognormal_vs_quadrature(self, p):
        model = LogNormalModel(p)
        for t in np.logspace(-3, 2, 12):
            assert_allclose(lognormal_partial_moment(p, t), quad_upper_partial_moment(model, t),
                            rtol=1e-8, atol=1e-14)

    def test_lognormal_small_t_is_mean(self):
        assert_allclose(lognormal_partial_moment(LN, 1e-12), math.exp(0.5), rtol=1e-10)
        with pytest.raises(DomainError):
            lognormal_partial_moment(LN, 0.0)

    @pytest.mark.parametrize("p", [PAR, ParetoParams(1.5, 2.0)])
    def test_pareto_vs_quadrature(self, p):
        model = ParetoModel(p)
        for t in np.concatenate([[0.5 * p.c_bar], p.c_bar * np.logspace(0, 3, 10)]):
            ref = p.mean - t if t < p.c_bar else integrate.quad(
                lambda x: (p.c_bar / x) ** p.a, t, math.inf, epsrel=1e-12)[0]
            assert_allclose(pareto_partial_moment(p, t), ref, rtol=1e-8)
            assert_allclose(pareto_partial_moment(p, t), quad_upper_partial_moment(model, t), rtol=1e-8)

    def test_pareto_worked_value(self):
        assert_allclose(pareto_partial_moment(PAR, 2.0), 1.0 / 8.0)

    def test_tail_vanishes(self):
        assert lognormal_partial_moment(LN, 1e6) < 1e-12
        assert pareto_partial_moment(PAR, 1e6) < 1e-11


class TestExpectiles:
    def test_half_is_mean(self):
        assert_allclose(lognormal_expectile(LogNormalParams(0.3, 0.5), 0.5).value, math.exp(0.55), rtol=1e-10)
        assert_allclose(pareto_expectile(PAR, 0.5).value, 1.5, rtol=1e-10)

    def test_pareto_vs_quadrature_solver(self):
        from expectile_lab.distributions import DistributionModel

        class QuadPareto(ParetoModel):
            upper_partial_moment = DistributionModel.upper_partial_moment

        assert_allclose(pareto_expectile(PAR, 0.9).value,
                        expectile_model(QuadPareto(PAR), 0.9, 1e-12).value, rtol=1e-8)

    def test_positivity(self):
        for a in (0.01, 0.3, 0.99):
            assert lognormal_expectile(LogNormalParams(-3.0, 2.0), a).value > 0
            assert pareto_expectile(ParetoParams(1.2, 2.0), a).value > 2.0


class TestHadamard:
    def test_zero_direction(self):
        x = np.linspace(-1, 10, 50)
        assert np.all(lognormal_hadamard_derivative(LN, (0.0, 0.0), x) == 0)
        assert np.all(pareto_hadamard_derivative(PAR, 0.0, x) == 0)

    def test_lognormal_value(self):
        assert_allclose(lognormal_hadamard_derivative(LN, (1.0, 0.0), 1.0), -stats.norm.pdf(0.0))

    @pytest.mark.parametrize("tau", [(1.0, 0.0), (0.0, 1.0), (0.7, -0.4)])
    def test_lognormal_finite_differences(self, tau):
        p = LogNormalParams(0.2, 0.8)
        x = np.linspace(0.05, 12, 400)

        def F(e):
            return LogNormalModel(LogNormalParams(p.m + e * tau[0], p.s2 + e * tau[1])).cdf(x)

        exact = lognormal_hadamard_derivative(p, tau, x)
        errs = []
        for h in (1e-2, 1e-3):
            fd = (F(h) - F(-h)) / (2 * h)
            errs.append(np.max(np.abs(fd - exact)))
        assert errs[0] / errs[1] > 50  # second order
        l1 = integrate.quad(lambda t: abs((LogNormalModel(LogNormalParams(p.m + 1e-4 * tau[0], p.s2 + 1e-4 * tau[1])).cdf(t)
                                           - LogNormalModel(p).cdf(t)) / 1e-4
                                          - lognormal_hadamard_derivative(p, tau, t)), 0, math.inf, limit=200)[0]
        assert l1 < 1e-3

    def test_pareto_finite_differences(self):
        x = np.linspace(1.01, 30, 300)
        F = lambda a: ParetoModel(ParetoParams(a, 1.0)).cdf(x)
        exact = pareto_hadamard_derivative(PAR, 1.0, x)
        errs = [np.max(np.abs((F(3 + h) - F(3 - h)) / (2 * h) - exact)) for h in (1e-2, 1e-3)]
        assert errs[0] / errs[1] > 50
        assert np.all(exact >= 0)  # the cdf increases with the tail index
        assert np.all(pareto_hadamard_derivative(PAR, 1.0, np.array([0.5, 1.0])) == 0)


class TestVariances:
    @pytest.mark.parametrize("p,a", [(LN, 0.9), (LogNormalParams(0.5, 0.25), 0.7),
                                     (LogNormalParams(-1.0, 2.0), 0.2), (LN, 0.5)])
    def test_lognormal_vs_numerical_delta(self, p, a):
        v = lognormal_asym_variance(p, a)
        assert_allclose(v, numerical_delta_variance(p, a), rtol=1e-8)
        assert_allclose(v, numerical_delta_variance(p, a, "finite_difference"), rtol=1e-6)

    def test_lognormal_half_is_mean_delta(self):
        s2 = 0.6
        v = lognormal_asym_variance(LogNormalParams(0.0, s2), 0.5)
        # mean e^{m+s2/2}: gradient (1, 1/2) e^{s2/2}, covariance diag(s2, 2 s2^2)
        assert_allclose(v, math.exp(s2) * (s2 + 0.5 * s2 * s2), rtol=1e-9)

    def test_lognormal_scaling(self):
        c = 3.0
        v0 = lognormal_asym_variance(LN, 0.8)
        assert_allclose(lognormal_asym_variance(LogNormalParams(math.log(c), 1.0), 0.8), c * c * v0, rtol=1e-9)

    def test_lognormal_divisor_switch_differs(self):
        assert abs(lognormal_asym_variance(LN, 0.9, "2") / lognormal_asym_variance(LN, 0.9) - 1) > 0.1

    def test_small_s_normal_limit(self):
        # as s -> 0 the law is close to N(e^m, s^2 e^{2m}); the expectile is e^m (1 + s z)
        from expectile_lab.distributions import NormalModel
        z = expectile_model(NormalModel(), 0.7, 1e-14).value
        s2 = 1e-8
        v = lognormal_asym_variance(LogNormalParams(0.0, s2), 0.7)
        assert_allclose(v / s2, 1 + z * z / 2, rtol=1e-3)

    @pytest.mark.parametrize("p,a", [(PAR, 0.9), (ParetoParams(4.0, 2.0), 0.3), (ParetoParams(2.5, 1.0), 0.6)])
    def test_pareto_vs_numerical_delta(self, p, a):
        v = pareto_asym_variance(p, a)
        assert_allclose(v, numerical_delta_variance(p, a), rtol=1e-8)
        assert_allclose(v, numerical_delta_variance(p, a, "finite_difference"), rtol=1e-6)

    def test_pareto_half(self):
        a, c = 3.0, 1.0
        dmean = -c / (a - 1) ** 2
        assert_allclose(pareto_asym_variance(PAR, 0.5), a * a * dmean ** 2, rtol=1e-9)

    def test_pareto_continuous_in_alpha(self):
        vs = [pareto_asym_variance(PAR, a) for a in (0.5 - 1e-7, 0.5, 0.5 + 1e-7)]
        assert_allclose(vs, vs[1], rtol=1e-5)


class TestDeltaCI:
    def test_widens_with_level(self):
        est = lognormal_mle(LogNormalModel(LN).sample(500, np.random.default_rng(0)))
        widths = [delta_method_ci(est, 0.9, lvl).width for lvl in (0.5, 0.9, 0.99, 0.9999)]
        assert np.all(np.diff(widths) > 0)

    def test_half_width_formula(self):
        est = pareto_mle(ParetoModel(PAR).sample(1000, np.random.default_rng(1)))
        ci = delta_method_ci(est, 0.7, 0.95)
        v = pareto_asym_variance(est.params, 0.7)
        assert_allclose(ci.width / 2, stats.norm.ppf(0.975) * math.sqrt(v / 1000), rtol=1e-12)
