"""Backtesting bivariate risk forecasts with copulas and Rosenblatt transforms."""

__version__ = "0.1.0"

from .copula import (CopulaSample, StudentCopula, StudentCopulaParams,  # noqa: E402
                     conditional_cdf, copula_density, fit_student_copula, sample_copula)
from .dist import (EmpiricalCdf, PseudoObservations, StudentMarginal,  # noqa: E402
                   StudentMarginalParams, dependence_measures, empirical_cdf_randomized,
                   fit_student_marginal, pseudo_observations)
from .market_data import (PriceSeries, ReturnSeries, SyncedPair, compute_returns,  # noqa: E402
                          load_prices, synchronize_pair)
from .pipelines import (BacktestConfig, InSampleBacktest, OutOfSampleBacktest,  # noqa: E402
                        cross_section, folded_cdf, generate_scenarios, insample_backtest,
                        order_assets, outofsample_backtest, risk_measures)
from .stat_tests import (CalibrationStore, CalibrationTable, calibrate_insample,  # noqa: E402
                         calibrate_outofsample, gr_statistic, p_value, shift_scale_map,
                         tile_statistic)
from .transforms import (EmpiricalRosenblattTransformer, KernelSpec,  # noqa: E402
                         RosenblattTransformer, rosenblatt_analytic, rosenblatt_empirical)
from .volatility import LMArchFilter, LmArchParams, compute_innovations, lmarch_forecast  # noqa: E402

__all__ = [
    "__version__",
    "CopulaSample",
    "StudentCopula",
    "StudentCopulaParams",
    "conditional_cdf",
    "copula_density",
    "fit_student_copula",
    "sample_copula",
    "EmpiricalCdf",
    "PseudoObservations",
    "StudentMarginal",
    "StudentMarginalParams",
    "dependence_measures",
    "empirical_cdf_randomized",
    "fit_student_marginal",
    "pseudo_observations",
    "PriceSeries",
    "ReturnSeries",
    "SyncedPair",
    "compute_returns",
    "load_prices",
    "synchronize_pair",
    "BacktestConfig",
    "InSampleBacktest",
    "OutOfSampleBacktest",
    "cross_section",
    "folded_cdf",
    "generate_scenarios",
    "insample_backtest",
    "order_assets",
    "outofsample_backtest",
    "risk_measures",
    "CalibrationStore",
    "CalibrationTable",
    "calibrate_insample",
    "calibrate_outofsample",
    "gr_statistic",
    "p_value",
    "shift_scale_map",
    "tile_statistic",
    "EmpiricalRosenblattTransformer",
    "KernelSpec",
    "RosenblattTransformer",
    "rosenblatt_analytic",
    "rosenblatt_empirical",
    "LMArchFilter",
    "LmArchParams",
    "compute_innovations",
    "lmarch_forecast",
]
