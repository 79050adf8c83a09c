"""Empirical beta copula, weighted Cramér-von Mises independence tests and
CFG-type Pickands dependence function estimators."""

from .core import RankMatrix, RngStream, TiePolicy, compute_ranks, pseudo_observations, weight_g
from .estimators import (
    EmpiricalBetaCopula,
    EmpiricalCopula,
    RankTransformer,
    empirical_beta_copula,
    empirical_copula,
    evaluate_grid,
)
from .exceptions import (
    BetaCopulaError,
    DimensionError,
    DomainError,
    GammaError,
    OmegaError,
    QuadratureError,
    RegionEmpty,
    SampleError,
    TieError,
)
from .inference import (
    PickandsEstimator,
    QuadratureSpec,
    WeightedCvMIndependenceTest,
    cfg_endpoint_corrected,
    cfg_log_estimate,
    cvm_statistic,
    imse_study,
    independence_test,
    null_distribution,
    pickands_curve,
    power_study,
)
from .models import (
    AsymmetricLogisticCopula,
    GumbelCopula,
    IndependenceCopula,
    MovingMaximumCopula,
    StudentZeroCorrCopula,
    parse_model_spec,
)
from .special import beta_order_cdf, recip_binom_expect

__version__ = "0.1.0"

__all__ = [
    "AsymmetricLogisticCopula",
    "BetaCopulaError",
    "DimensionError",
    "DomainError",
    "EmpiricalBetaCopula",
    "EmpiricalCopula",
    "GammaError",
    "GumbelCopula",
    "IndependenceCopula",
    "MovingMaximumCopula",
    "OmegaError",
    "PickandsEstimator",
    "QuadratureError",
    "QuadratureSpec",
    "RankMatrix",
    "RankTransformer",
    "RegionEmpty",
    "RngStream",
    "SampleError",
    "StudentZeroCorrCopula",
    "TieError",
    "TiePolicy",
    "WeightedCvMIndependenceTest",
    "beta_order_cdf",
    "cfg_endpoint_corrected",
    "cfg_log_estimate",
    "compute_ranks",
    "cvm_statistic",
    "empirical_beta_copula",
    "empirical_copula",
    "evaluate_grid",
    "imse_study",
    "independence_test",
    "null_distribution",
    "parse_model_spec",
    "pickands_curve",
    "power_study",
    "pseudo_observations",
    "recip_binom_expect",
    "weight_g",
]
