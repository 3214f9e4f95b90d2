"""Synthetic daily price panels for demos and tests."""

from __future__ import annotations

import numpy as np
import pandas as pd

TOP10 = ["BTC", "ETH", "BNB", "SOL", "XRP", "DOGE", "ADA", "AVAX", "SHIB", "DOT"]


def make_prices(n_rows: int = 1667, tickers=TOP10, seed: int = 0, start: str = "2020-08-20",
                drift: float = 0.0004, vol: float = 0.04, correlation: float = 0.5) -> pd.DataFrame:
    """Correlated geometric random walks on consecutive calendar days.

    Each asset gets its own drift and volatility drawn around ``drift`` and
    ``vol``; a single common factor sets pairwise correlation.
    """
    rng = np.random.default_rng(seed)
    tickers = list(tickers)
    n = len(tickers)
    mus = drift * rng.uniform(0.0, 2.0, n)
    sigmas = vol * rng.uniform(0.5, 1.5, n)
    common = rng.standard_normal((n_rows - 1, 1))
    idio = rng.standard_normal((n_rows - 1, n))
    shocks = np.sqrt(correlation) * common + np.sqrt(1 - correlation) * idio
    log_ret = mus + sigmas * shocks
    start_prices = 10.0 ** rng.uniform(-4, 4, n)
    log_paths = np.vstack([np.zeros(n), np.cumsum(log_ret, axis=0)])
    index = pd.date_range(start, periods=n_rows, freq="D", name="date")
    return pd.DataFrame(start_prices * np.exp(log_paths), index=index, columns=tickers)


def make_regime_flip_prices(n_rows: int = 400, seed: int = 0, start: str = "2021-01-01",
                            drift: float = 0.004, vol: float = 0.01) -> pd.DataFrame:
    """Two assets whose leadership swaps halfway through.

    ``A`` drifts up and ``B`` down over the first half; the signs reverse in
    the second half.
    """
    rng = np.random.default_rng(seed)
    half = (n_rows - 1) // 2
    sign = np.where(np.arange(n_rows - 1) < half, 1.0, -1.0)
    a = sign * drift + vol * rng.standard_normal(n_rows - 1)
    b = -sign * drift + vol * rng.standard_normal(n_rows - 1)
    log_paths = np.vstack([np.zeros(2), np.cumsum(np.column_stack([a, b]), axis=0)])
    index = pd.date_range(start, periods=n_rows, freq="D", name="date")
    return pd.DataFrame(100.0 * np.exp(log_paths), index=index, columns=["A", "B"])
