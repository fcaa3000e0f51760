import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from expectile_lab.distributions import (
    EmpiricalDistribution,
    MixtureModel,
    NormalModel,
    TwoPointModel,
    as_alpha,
    quad_upper_partial_moment,
)
from expectile_lab.errors import InvalidAlpha, ValidationError


def test_empirical_cdf_right_continuous():
    d = EmpiricalDistribution([2.0, 0.0, 1.0, 1.0])
    assert_allclose(d.cdf([-1.0, 0.0, 0.5, 1.0, 2.0]), [0.0, 0.25, 0.25, 0.75, 1.0])


def test_empirical_quantile_left_continuous():
    d = EmpiricalDistribution([1.0, 2.0, 3.0, 4.0])
    assert d.quantile(0.25) == 1.0
    assert d.quantile(0.2500001) == 2.0
    assert d.quantile(1.0) == 4.0


def test_observation_order_kept():
    x = [3.0, 1.0, 2.0]
    d = EmpiricalDistribution(x)
    assert_allclose(d.observations, x)
    assert_allclose(d.points, sorted(x))
    assert_allclose(d.observations[d.sort_order], d.points)


def test_arrays_are_read_only():
    d = EmpiricalDistribution([1.0, 2.0])
    with pytest.raises(ValueError):
        d.points[0] = 5.0


def test_rejects_bad_input():
    with pytest.raises(ValidationError):
        EmpiricalDistribution([])
    with pytest.raises(ValidationError):
        EmpiricalDistribution([1.0, float("inf")])
    with pytest.raises(InvalidAlpha):
        as_alpha(1.0)


def test_empirical_partial_moments():
    x = np.array([-1.0, 0.5, 2.0, 4.0])
    d = EmpiricalDistribution(x)
    for t in (-2.0, 0.0, 1.0, 5.0):
        assert_allclose(d.upper_partial_moment(t), np.mean(np.maximum(x - t, 0)))
        assert_allclose(d.lower_partial_moment(t), np.mean(np.maximum(t - x, 0)))
        up, lo = d.partial_second_moments(t)
        assert_allclose(up, np.mean(np.maximum(x - t, 0) ** 2))
        assert_allclose(lo, np.mean(np.maximum(t - x, 0) ** 2))


@pytest.mark.parametrize("model", [NormalModel(1.0, 2.0), TwoPointModel(0.3, -1.0, 2.0),
                                   MixtureModel([NormalModel(0, 1), NormalModel(4, 0.5)], [0.6, 0.4])])
def test_model_upm_matches_quadrature(model):
    for t in (-3.0, 0.0, 0.7, 2.5, 6.0):
        assert_allclose(model.upper_partial_moment(t), quad_upper_partial_moment(model, t),
                        rtol=1e-8, atol=1e-12)


def test_normal_second_moments_match_direct_quadrature():
    m = NormalModel(0.5, 1.5)
    pdf = lambda x: math.exp(-0.5 * ((x - 0.5) / 1.5) ** 2) / (1.5 * math.sqrt(2 * math.pi))
    t = 1.1
    up = integrate.quad(lambda x: (x - t) ** 2 * pdf(x), t, math.inf)[0]
    lo = integrate.quad(lambda x: (t - x) ** 2 * pdf(x), -math.inf, t)[0]
    assert_allclose(m.partial_second_moments(t), (up, lo), rtol=1e-8)


def test_mixture_quantile_inverts_cdf():
    m = MixtureModel([NormalModel(0, 1), NormalModel(4, 0.5)], [0.6, 0.4])
    for p in (0.01, 0.5, 0.65, 0.99):
        assert_allclose(m.cdf(m.quantile(p)), p, atol=1e-10)


def test_two_point_cdf_limits():
    m = TwoPointModel(0.25, 0.0, 1.0)
    assert m.cdf(-1) == 0 and m.cdf(0) == 0.75 and m.cdf(1) == 1.0
    assert m.mean == 0.25
