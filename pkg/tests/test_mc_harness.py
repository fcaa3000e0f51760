import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import integrate, stats

from expectile_lab.errors import ConfigError, DegenerateGenerator, ValidationError
from expectile_lab.mc_harness import (
    AR1,
    IIDConstant,
    IIDLogNormal,
    IIDNormal,
    IIDPareto,
    IIDTwoPoint,
    comparison_table,
    consistency_experiment,
    coverage_experiment,
    generate,
    ks_threshold,
    make_generator,
    normality_experiment,
    parametric_experiment,
    robustness_experiment,
)


class TestGenerators:
    @pytest.mark.parametrize("gen", [IIDNormal(1.0, 4.0), IIDLogNormal(), IIDPareto(), IIDTwoPoint(0.3),
                                     IIDConstant(2.0), AR1(0.5)])
    def test_deterministic_in_seed(self, gen):
        assert_array_equal(generate(gen, 50, 3), generate(gen, 50, 3))
        if gen.scale() > 0:
            assert not np.array_equal(generate(gen, 50, 3), generate(gen, 50, 4))

    def test_make_generator(self):
        assert make_generator({"kind": "ar1", "phi": 0.2}) == AR1(0.2)
        with pytest.raises(ConfigError):
            make_generator({"kind": "garch"})
        with pytest.raises(ConfigError):
            make_generator({"kind": "normal", "mu": 1.0})

    def test_ar1_validation(self):
        with pytest.raises(ValidationError):
            AR1(1.0)
        with pytest.raises(ValidationError):
            generate(AR1(0.5), 0, 1)

    def test_ar1_zero_phi_is_iid(self):
        g = AR1(0.0, 2.0)
        assert_allclose(g.true_variance(0.8), IIDNormal(0.0, 4.0).true_variance(0.8), rtol=1e-10)
        x = generate(g, 50_000, 1)
        assert abs(np.corrcoef(x[:-1], x[1:])[0, 1]) < 0.02

    def test_ar1_sample_autocorrelation(self):
        x = generate(AR1(0.5), 200_000, 2)
        assert abs(np.corrcoef(x[:-1], x[1:])[0, 1] - 0.5) < 0.01
        assert abs(x.std() - AR1(0.5).marginal_sd) < 0.01

    def test_ar1_longrun_at_half_is_mean_variance(self):
        # at alpha = 1/2 the limit is the long-run variance of the mean
        g = AR1(0.5, 1.0)
        assert_allclose(g.true_variance(0.5), 1.0 / (1 - 0.5) ** 2, rtol=1e-8)
        assert_allclose(g.naive_variance(0.5), 1.0 / (1 - 0.25), rtol=1e-8)

    def test_ar1_longrun_exceeds_naive(self):
        g = AR1(0.5)
        assert g.true_variance(0.7) > 2 * g.naive_variance(0.7)

    def test_normal_variance_by_quadrature(self):
        g = IIDNormal(0.0, 1.0)
        a = 0.8
        r = g.true_expectile(a)
        d = (1 - 2 * a) * stats.norm.cdf(r) + a
        f = lambda x: ((a if x > r else 1 - a) * (x - r)) ** 2 * stats.norm.pdf(x)
        u2 = integrate.quad(f, -math.inf, r)[0] + integrate.quad(f, r, math.inf)[0]
        assert_allclose(g.true_variance(a), u2 / d ** 2, rtol=1e-8)

    def test_two_point_closed_forms(self):
        g = IIDTwoPoint(0.5)
        for a in (0.2, 0.7):
            assert_allclose(g.true_expectile(a), a, rtol=1e-14)
            assert_allclose(g.true_variance(a), 4 * a * a * (1 - a) ** 2, rtol=1e-12)

    def test_ks_threshold(self):
        assert_allclose(ks_threshold(2000), 1.5 * 1.628 / math.sqrt(2000))


class TestConsistency:
    def test_constant_exact(self):
        rep = consistency_experiment(IIDConstant(3.0), 0.9, [10, 100, 1000])
        assert rep.statistics["errors"] == [0.0, 0.0, 0.0] and rep.passed

    def test_lognormal_error_shrinks(self):
        rep = consistency_experiment(IIDLogNormal(), 0.9, [100, 10_000, 200_000], seed=1)
        assert rep.passed
        assert len(rep.tables["trajectory"]) == 3

    def test_parametric_estimator(self):
        rep = consistency_experiment(IIDPareto(3.0), 0.7, [100, 50_000], seed=2, estimator="pareto_mle")
        assert rep.passed

    def test_grid_validation(self):
        with pytest.raises(ValidationError):
            consistency_experiment(IIDNormal(), 0.5, [100, 50])


class TestNormality:
    def test_two_point_passes(self):
        rep = normality_experiment(IIDTwoPoint(0.5), 0.7, 500, 400, seed=3)
        assert rep.passed and rep.statistics["ks_distance"] <= rep.statistics["threshold"]
        assert sum(r["count"] for r in rep.tables["histogram"]) <= 400

    def test_ar1_reports_naive(self):
        rep = normality_experiment(AR1(0.5), 0.7, 1000, 300, seed=4, workers=4)
        assert rep.statistics["naive_ks_distance"] > rep.statistics["ks_distance"]

    def test_workers_do_not_change_result(self):
        a = normality_experiment(IIDNormal(), 0.8, 100, 200, seed=5, workers=1)
        b = normality_experiment(IIDNormal(), 0.8, 100, 200, seed=5, workers=8)
        assert a.as_dict() == b.as_dict()

    def test_constant_is_degenerate(self):
        with pytest.raises(DegenerateGenerator):
            normality_experiment(IIDConstant(1.0), 0.7, 100, 200)

    def test_needs_reps(self):
        with pytest.raises(ValidationError):
            normality_experiment(IIDNormal(), 0.7, 100, 199)


class TestCoverage:
    def test_smoke_efron_and_delta(self):
        rep = coverage_experiment(IIDLogNormal(), 0.7, 200, 500, ("efron", "delta_method"), B=99,
                                  family="lognormal_mle", seed=6, workers=4)
        cov = rep.statistics["coverage"]
        assert set(cov) == {"efron", "delta_method"}
        assert cov["delta_method"] > 0.9 and cov["efron"] > 0.85

    def test_validation(self):
        with pytest.raises(DegenerateGenerator):
            coverage_experiment(IIDConstant(), 0.7, 100, 500)
        with pytest.raises(ValidationError):
            coverage_experiment(IIDNormal(), 0.7, 100, 499)
        with pytest.raises(ValidationError):
            coverage_experiment(IIDNormal(), 0.7, 100, 500, ("delta_method",))
        with pytest.raises(ValidationError):
            coverage_experiment(IIDNormal(), 0.7, 100, 500, ("circular",), block_length=3)


class TestRobustness:
    def test_curves(self):
        rep = robustness_experiment(IIDNormal(), 0.9, (0.0, 0.01, 0.05), n=300, reps=100, seed=7)
        sh = rep.statistics["shift"]
        assert all(v[0] == 0.0 for v in sh.values())
        assert sh["expectile"][-1] > sh["median"][-1]
        assert sh["expectile"][-1] == 1.0
        assert rep.passed is None

    def test_eps_range(self):
        with pytest.raises(ValidationError):
            robustness_experiment(IIDNormal(), 0.9, (0.6,))


class TestComparison:
    def test_rows(self):
        rep = comparison_table(IIDNormal(), 0.9, 500, 200, seed=8)
        rows = {r["functional"]: r for r in rep.statistics["rows"]}
        assert set(rows) == {"var", "avar", "expectile"}
        assert_allclose(rows["var"]["truth"], stats.norm.ppf(0.9), rtol=1e-12)
        assert_allclose(rows["avar"]["truth"], stats.norm.pdf(stats.norm.ppf(0.9)) / 0.1, rtol=1e-8)
        assert all(r["mean_abs_error"] < 0.2 for r in rows.values())
        assert rows["expectile"]["contamination_shift"] > rows["var"]["contamination_shift"]

    def test_needs_reps(self):
        with pytest.raises(ValidationError):
            comparison_table(IIDNormal(), 0.9, 100, 199)


class TestParametric:
    def test_lognormal_report(self):
        rep = parametric_experiment("lognormal", {"m": 0.0, "s2": 1.0}, 0.9, 2000, 300, seed=9)
        st = rep.statistics
        assert set(st["closed_form_variance"]) == {"s", "2"}
        assert_allclose(st["closed_form_variance"]["s"], st["numerical_delta_variance"], rtol=1e-6)
        assert st["invalid_fits"] == 0

    def test_pareto_hill(self):
        rep = parametric_experiment("pareto", {"a": 3.0, "c_bar": 1.0}, 0.7, 5000, 200, seed=10,
                                    estimator="hill")
        assert rep.statistics["n_effective"] == int(5000 ** 0.4)
        assert "tail_index_ks" in rep.statistics

    def test_unknown_family(self):
        with pytest.raises(ValidationError):
            parametric_experiment("weibull", {}, 0.5, 10, 10)
