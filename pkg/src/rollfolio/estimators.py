"""Scikit-learn style portfolio estimators.

``fit(X)`` takes a date-indexed panel of daily log returns and learns
weights; ``predict(X)`` returns the daily portfolio return series on ``X``;
``score(X)`` is the annualized Sharpe ratio of that series.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from rollfolio.backtest import run_schedule, run_static
from rollfolio.metrics import MetricsConfig, sharpe_ratio
from rollfolio.optimizer import OptimizerConfig, optimize_rolling, optimize_static
from rollfolio.schedule import equal_weights
from rollfolio.utils.validation import check_panel

__all__ = ["EqualWeighted", "MaxSharpe", "RollingMaxSharpe"]


class BasePortfolio(BaseEstimator):
    """Shared ``predict``/``score`` for estimators that set ``weights_``."""

    risk_free_rate: float = 0.0
    periods_per_year: float = 252

    def _metrics_config(self) -> MetricsConfig:
        return MetricsConfig(risk_free_rate=self.risk_free_rate,
                             periods_per_year=self.periods_per_year)

    def _validate_fit(self, X) -> pd.DataFrame:
        X = check_panel(X, min_rows=1, what="return panel")
        self.feature_names_in_ = np.asarray(X.columns, dtype=object)
        self.n_features_in_ = X.shape[1]
        return X

    def _validate_predict(self, X) -> pd.DataFrame:
        check_is_fitted(self, "weights_")
        X = check_panel(X, min_rows=1, what="return panel")
        if list(X.columns) != list(self.feature_names_in_):
            raise ValueError(
                f"columns {list(X.columns)} differ from those seen in fit "
                f"{list(self.feature_names_in_)}"
            )
        return X

    def predict(self, X) -> pd.Series:
        X = self._validate_predict(X)
        return run_static(X, self.weights_).portfolio_returns

    def score(self, X, y=None) -> float:
        return sharpe_ratio(self.predict(X), self._metrics_config())


class EqualWeighted(BasePortfolio):
    """The 1/N portfolio.

    Parameters
    ----------
    risk_free_rate : float
        Only used by :meth:`score`.
    periods_per_year : float
        Only used by :meth:`score`.
    """

    def __init__(self, risk_free_rate=0.0, periods_per_year=252):
        self.risk_free_rate = risk_free_rate
        self.periods_per_year = periods_per_year

    def fit(self, X, y=None):
        X = self._validate_fit(X)
        self.weights_ = equal_weights(X.columns)
        return self


class _OptimizerParams:
    def _optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(
            restarts=self.restarts,
            max_iterations=self.max_iter,
            convergence_tol=self.tol,
            step_shrink=self.step_shrink,
            seed=self.random_state,
            fallback_policy=self.fallback,
        )


class MaxSharpe(_OptimizerParams, BasePortfolio):
    """Static maximum-Sharpe portfolio without short selling.

    Parameters
    ----------
    risk_free_rate : float, default=0.0
        Annualized.
    periods_per_year : float, default=252
    restarts : int, default=16
        Start points: equal weights plus ``restarts - 1`` random ones.
    max_iter : int, default=500
        Iteration cap per start point.
    tol : float, default=1e-8
        Stop when one iteration improves the objective by less than this.
    step_shrink : float, default=0.5
        Backtracking factor.
    fallback : {"equal_weights", "carry_forward"}, default="equal_weights"
    random_state : int, default=0

    Attributes
    ----------
    weights_ : pandas.Series
    objective_ : float or None
        In-sample Sharpe ratio of ``weights_``; None after a fallback.
    fallback_used_ : bool
    n_iter_ : int
        Projected-gradient iterations summed over all starts.
    """

    def __init__(self, risk_free_rate=0.0, periods_per_year=252, restarts=16, max_iter=500,
                 tol=1e-8, step_shrink=0.5, fallback="equal_weights", random_state=0):
        self.risk_free_rate = risk_free_rate
        self.periods_per_year = periods_per_year
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.step_shrink = step_shrink
        self.fallback = fallback
        self.random_state = random_state

    def fit(self, X, y=None):
        X = self._validate_fit(X)
        result = optimize_static(X, self._metrics_config(), self._optimizer_config())
        self.weights_ = result.weights
        self.objective_ = result.objective
        self.fallback_used_ = result.fallback
        self.n_iter_ = result.n_iter
        return self


class RollingMaxSharpe(_OptimizerParams, BasePortfolio):
    """Maximum-Sharpe weights re-estimated on a trailing window.

    Every ``holding`` rows the weights are re-optimized on the previous
    ``window`` rows; the first ``window`` rows are held at equal weights.
    ``predict`` applies the fitted schedule to any panel whose dates it
    covers, so fit on the full history and predict on a sub-period to get
    out-of-sample returns.

    Parameters
    ----------
    window : int, default=30
    holding : int, default=30
    **others
        As for :class:`MaxSharpe`.

    Attributes
    ----------
    schedule_ : WeightSchedule
    weights_ : pandas.Series
        Weights of the last schedule entry.
    """

    def __init__(self, window=30, holding=30, risk_free_rate=0.0, periods_per_year=252,
                 restarts=16, max_iter=500, tol=1e-8, step_shrink=0.5,
                 fallback="equal_weights", random_state=0):
        self.window = window
        self.holding = holding
        self.risk_free_rate = risk_free_rate
        self.periods_per_year = periods_per_year
        self.restarts = restarts
        self.max_iter = max_iter
        self.tol = tol
        self.step_shrink = step_shrink
        self.fallback = fallback
        self.random_state = random_state

    def fit(self, X, y=None):
        X = self._validate_fit(X)
        self.schedule_ = optimize_rolling(X, self._metrics_config(), self._optimizer_config(),
                                          window=self.window, holding=self.holding)
        self.weights_ = self.schedule_.final_weights
        return self

    def predict(self, X) -> pd.Series:
        X = self._validate_predict(X)
        schedule = self.schedule_.restrict(X.index[0], X.index[-1])
        return run_schedule(X, schedule).portfolio_returns
