"""Input validation helpers for panels, series and weight vectors.

Panels are :class:`pandas.DataFrame` objects indexed by date with one column
per asset; portfolio series are :class:`pandas.Series`; weight vectors are
:class:`pandas.Series` indexed by ticker.
"""

from __future__ import annotations

import numpy as np
import pandas as pd

from rollfolio.exceptions import DataError

SIMPLEX_ATOL = 1e-9


def _check_index(index: pd.Index, what: str) -> None:
    if index.has_duplicates:
        dup = index[index.duplicated()][0]
        raise DataError(f"{what} has duplicate date {format_date(dup)}")
    if not index.is_monotonic_increasing:
        raise DataError(f"{what} dates are not strictly increasing")


def format_date(d) -> str:
    """``YYYY-MM-DD`` for timestamps, ``str`` otherwise."""
    if isinstance(d, pd.Timestamp):
        return d.strftime("%Y-%m-%d")
    return str(d)


def check_panel(X, *, min_rows: int = 1, what: str = "panel") -> pd.DataFrame:
    """Validate a date-indexed numeric panel and return it as float64.

    Plain arrays are accepted and receive a ``RangeIndex`` and
    ``asset_<i>`` column names.  Values must be finite.
    """
    if isinstance(X, pd.DataFrame):
        df = X.astype(np.float64, copy=False)
    else:
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise DataError(f"{what} must be 2-dimensional, got shape {arr.shape}")
        df = pd.DataFrame(arr, columns=[f"asset_{i}" for i in range(arr.shape[1])])
    if df.shape[1] == 0:
        raise DataError(f"{what} has no asset columns")
    if df.shape[0] < min_rows:
        raise DataError(f"{what} needs at least {min_rows} rows, got {df.shape[0]}")
    if df.columns.has_duplicates:
        raise DataError(f"{what} has duplicate asset columns")
    _check_index(df.index, what)
    if not np.isfinite(df.to_numpy()).all():
        raise DataError(f"{what} contains non-finite values")
    return df


def check_price_panel(X, *, min_rows: int = 1) -> pd.DataFrame:
    """Validate a cleaned price panel: finite and strictly positive."""
    df = check_panel(X, min_rows=min_rows, what="price panel")
    if (df.to_numpy() <= 0).any():
        raise DataError("price panel contains non-positive prices")
    return df


def check_series(r, *, min_len: int = 1, what: str = "return series") -> pd.Series:
    """Validate a finite, strictly date-ordered series of daily returns."""
    if isinstance(r, pd.Series):
        s = r.astype(np.float64, copy=False)
    else:
        s = pd.Series(np.asarray(r, dtype=np.float64).ravel())
    if len(s) < min_len:
        raise DataError(f"{what} needs at least {min_len} observations, got {len(s)}")
    _check_index(s.index, what)
    if not np.isfinite(s.to_numpy()).all():
        raise DataError(f"{what} contains non-finite values")
    return s


def check_weights(w, assets=None, *, atol: float = SIMPLEX_ATOL) -> pd.Series:
    """Validate a long-only, fully invested weight vector.

    Parameters
    ----------
    w : pandas.Series or array-like
        Weights, indexed by ticker when a Series.
    assets : sequence of str, optional
        Expected tickers. The returned Series is reordered to match.
    atol : float
        Tolerance on ``|sum(w) - 1|``.
    """
    if isinstance(w, pd.Series):
        s = w.astype(np.float64)
    else:
        arr = np.asarray(w, dtype=np.float64).ravel()
        index = list(assets) if assets is not None else [f"asset_{i}" for i in range(arr.size)]
        if len(index) != arr.size:
            raise DataError(f"got {arr.size} weights for {len(index)} assets")
        s = pd.Series(arr, index=index)
    if assets is not None:
        assets = list(assets)
        if set(s.index) != set(assets) or len(s) != len(assets):
            raise DataError(
                f"weight assets {list(s.index)} do not match panel assets {assets}"
            )
        s = s.reindex(assets)
    if s.empty:
        raise DataError("weight vector is empty")
    values = s.to_numpy()
    if not np.isfinite(values).all():
        raise DataError("weight vector contains non-finite values")
    if values.min() < 0:
        raise DataError(f"negative weight {values.min():g} (short selling not allowed)")
    if abs(values.sum() - 1.0) > atol:
        raise DataError(f"weights sum to {values.sum():.12g}, expected 1")
    return s


def simplex_violation(w, atol: float = SIMPLEX_ATOL) -> str | None:
    """Describe why ``w`` is off the probability simplex, or return None."""
    values = np.asarray(w, dtype=np.float64)
    if values.size == 0:
        return "empty weight vector"
    if not np.isfinite(values).all():
        return "non-finite weight"
    if values.min() < 0:
        return f"negative weight {values.min():.6g}"
    if abs(values.sum() - 1.0) > atol:
        return f"weights sum to {values.sum():.12g}"
    return None
