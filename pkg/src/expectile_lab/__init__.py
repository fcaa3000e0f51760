"""Expectile risk measures: estimation, asymptotics, bootstrap and Monte Carlo checks."""
__version__ = "0.1.0"

from .core import (
    DEFAULT_TOL,
    ExpectileEstimate,
    avar,
    check_axioms,
    expectile,
    expectile_empirical,
    expectile_model,
    u_score,
    v_loss,
    var_quantile,
    wasserstein1,
)
from .distributions import AlphaLevel, EmpiricalDistribution, MixtureModel, NormalModel, TwoPointModel
from .errors import ExpectileLabError, NumericalError, ValidationError

__all__ = [
    "__version__",
    "DEFAULT_TOL",
    "AlphaLevel",
    "EmpiricalDistribution",
    "ExpectileEstimate",
    "ExpectileLabError",
    "MixtureModel",
    "NormalModel",
    "NumericalError",
    "TwoPointModel",
    "ValidationError",
    "avar",
    "check_axioms",
    "expectile",
    "expectile_empirical",
    "expectile_model",
    "u_score",
    "v_loss",
    "var_quantile",
    "wasserstein1",
]
