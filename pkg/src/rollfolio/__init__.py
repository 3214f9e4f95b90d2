"""Sharpe-maximizing static and rolling portfolio construction for daily crypto closes."""

from rollfolio.estimators import EqualWeighted, MaxSharpe, RollingMaxSharpe
from rollfolio.market_data import (
    LogReturnTransformer,
    PriceCleaner,
    clean_prices,
    load_prices,
    log_returns,
    split,
    summarize,
)
from rollfolio.metrics import MetricsConfig, MetricsReport, full_report
from rollfolio.optimizer import OptimizerConfig, grid_oracle, optimize_rolling, optimize_static
from rollfolio.schedule import WeightSchedule, equal_weights

__version__ = "0.1.0"

__all__ = [
    "EqualWeighted",
    "LogReturnTransformer",
    "MaxSharpe",
    "MetricsConfig",
    "MetricsReport",
    "OptimizerConfig",
    "PriceCleaner",
    "RollingMaxSharpe",
    "WeightSchedule",
    "clean_prices",
    "equal_weights",
    "full_report",
    "grid_oracle",
    "load_prices",
    "log_returns",
    "optimize_rolling",
    "optimize_static",
    "split",
    "summarize",
]
