"""Apply weights or weight schedules to a return panel.

Weights are re-struck to target every day, so the portfolio return on each
row is the dot product of that row's log returns with the governing weights.
This is a linear approximation to the log of the weighted simple return; it
matches the quantity the optimizer maximizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from rollfolio.exceptions import DataError, ScheduleError
from rollfolio.schedule import WeightSchedule
from rollfolio.utils.validation import check_panel, check_weights, format_date as _fmt

__all__ = ["BacktestResult", "read_backtest", "run_schedule", "run_static"]


@dataclass
class BacktestResult:
    portfolio_returns: pd.Series
    equity_curve: pd.Series
    applied_weights: WeightSchedule
    turnover: pd.Series

    def to_csv(self, path=None) -> str:
        """Rows of ``date,portfolio_return,equity`` at full precision."""
        lines = ["date,portfolio_return,equity"]
        for d, r, e in zip(self.portfolio_returns.index, self.portfolio_returns, self.equity_curve):
            lines.append(f"{_fmt(d)},{float(r)!r},{float(e)!r}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def read_backtest(path) -> tuple[pd.Series, pd.Series]:
    """Load ``(portfolio_returns, equity_curve)`` written by :meth:`BacktestResult.to_csv`."""
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns) != ["date", "portfolio_return", "equity"]:
        raise DataError(f"{path}: not a backtest file")
    index = pd.DatetimeIndex(pd.to_datetime(df["date"], format="%Y-%m-%d"), name="date")
    returns = pd.Series(df["portfolio_return"].to_numpy(), index=index, name="portfolio")
    equity = pd.Series(df["equity"].to_numpy(), index=index, name="equity")
    return returns, equity


def run_static(returns, w) -> BacktestResult:
    """Hold constant weights over the whole panel."""
    panel = check_panel(returns, min_rows=1, what="return panel")
    weights = check_weights(w, panel.columns)
    schedule = WeightSchedule.constant(weights, panel.index[0], panel.index[-1])
    return run_schedule(panel, schedule)


def run_schedule(returns, schedule: WeightSchedule) -> BacktestResult:
    """Apply each schedule entry to the rows dated within it.

    Entries that cover no row of the panel are ignored.  Turnover is recorded
    at every boundary between consecutive applied entries as the sum of
    absolute weight changes.

    Raises
    ------
    ScheduleError
        If a row is covered by no entry or by more than one.
    """
    panel = check_panel(returns, min_rows=1, what="return panel")
    index = panel.index
    X = panel.to_numpy()
    coverage = np.zeros(len(index), dtype=int)
    portfolio = np.empty(len(index))
    applied = []
    for entry in schedule.entries:
        mask = (index >= entry.start) & (index <= entry.end)
        if not mask.any():
            continue
        w = check_weights(entry.weights, panel.columns).to_numpy()
        coverage += mask
        rows = np.flatnonzero(mask)
        portfolio[rows] = X[rows] @ w
        applied.append(entry)
    if (coverage == 0).any():
        raise ScheduleError(f"schedule does not cover {_fmt(index[np.argmax(coverage == 0)])}")
    if (coverage > 1).any():
        raise ScheduleError(f"schedule entries overlap at {_fmt(index[np.argmax(coverage > 1)])}")

    turnover = pd.Series(
        [float(np.abs(cur.weights.reindex(panel.columns).to_numpy()
                      - prev.weights.reindex(panel.columns).to_numpy()).sum())
         for prev, cur in zip(applied, applied[1:])],
        index=pd.Index([e.start for e in applied[1:]], name="date"),
        name="turnover",
        dtype=np.float64,
    )
    port = pd.Series(portfolio, index=index, name="portfolio")
    equity = pd.Series(np.exp(np.cumsum(portfolio)), index=index, name="equity")
    return BacktestResult(
        port, equity,
        WeightSchedule(applied, schedule.window_length, schedule.holding_period),
        turnover,
    )
