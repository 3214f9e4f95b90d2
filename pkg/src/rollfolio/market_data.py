"""Daily close-price panels: loading, cleaning, log returns, summary and split.

A price panel is a :class:`pandas.DataFrame` with a ``DatetimeIndex`` named
``date`` and one float column per ticker.  The canonical file format is
delimited text with a header row, an ISO-8601 date in the first column and
one ticker per remaining column.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from rollfolio.exceptions import DataError
from rollfolio.utils.validation import check_panel, check_price_panel

logger = logging.getLogger(__name__)

DATE_FORMAT = "%Y-%m-%d"

__all__ = [
    "CleaningEvent",
    "CleaningLog",
    "LogReturnTransformer",
    "PriceCleaner",
    "SplitPair",
    "clean_prices",
    "load_prices",
    "log_returns",
    "reconstruct_prices",
    "split",
    "summarize",
    "write_prices",
]


def _parse_float(cell: str) -> float:
    try:
        return float(cell)
    except (TypeError, ValueError):
        return np.nan


def load_prices(source, delimiter: str = ",") -> pd.DataFrame:
    """Read a price panel from delimited text.

    Dates are parsed and sorted ascending. Cells that do not parse as numbers
    become NaN and are left for :func:`clean_prices`.

    Raises
    ------
    FileNotFoundError
        If ``source`` does not exist.
    DataError
        No date column, no asset columns, or a duplicated date.
    """
    path = Path(source)
    if not path.is_file():
        raise FileNotFoundError(f"price file not found: {path}")
    raw = pd.read_csv(
        path, sep=delimiter, dtype=str, keep_default_na=False, skipinitialspace=True
    )
    if raw.shape[1] == 0:
        raise DataError(f"{path}: no header row")
    date_col = raw.columns[0]
    dates = pd.to_datetime(raw[date_col].str.strip(), format=DATE_FORMAT, errors="coerce")
    if len(raw) and dates.isna().all():
        raise DataError(f"{path}: no date column (first column '{date_col}' is not YYYY-MM-DD)")
    if dates.isna().any():
        bad = raw[date_col][dates.isna()].iloc[0]
        raise DataError(f"{path}: unparseable date '{bad}'")
    assets = [str(c).strip() for c in raw.columns[1:]]
    if not assets:
        raise DataError(f"{path}: no asset columns")
    if dates.duplicated().any():
        dup = dates[dates.duplicated()].iloc[0]
        raise DataError(f"{path}: duplicate date {dup.strftime(DATE_FORMAT)}")

    cells = raw.iloc[:, 1:].itertuples(index=False, name=None)
    values = np.array(
        [[_parse_float(v) for v in row] for row in cells], dtype=np.float64
    ).reshape(len(raw), len(assets))
    panel = pd.DataFrame(values, index=pd.DatetimeIndex(dates, name="date"), columns=assets)
    panel = panel.sort_index()
    logger.debug("loaded %d rows x %d assets from %s", *panel.shape, path)
    return panel


def write_prices(panel: pd.DataFrame, path=None, delimiter: str = ",") -> str:
    """Render a panel in the canonical format, writing it to ``path`` if given.

    Reloading with :func:`load_prices` yields bit-identical values; missing
    prices are written as empty cells.
    """
    out = panel.copy()
    out.index = pd.DatetimeIndex(out.index).strftime(DATE_FORMAT)
    out.index.name = "date"
    # repr() is the shortest string that round-trips a float64 exactly
    out = out.apply(lambda col: col.map(lambda v: "" if np.isnan(v) else repr(float(v))))
    text = out.to_csv(sep=delimiter, lineterminator="\n")
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


@dataclass(frozen=True)
class CleaningEvent:
    date: pd.Timestamp
    asset: str
    action: str  # "fill" or "drop"

    def to_line(self) -> str:
        return f"{self.date.strftime(DATE_FORMAT)},{self.asset},{self.action}"


@dataclass
class CleaningLog:
    """Record of every forward-fill and dropped observation."""

    events: list[CleaningEvent] = field(default_factory=list)

    def counts(self) -> pd.DataFrame:
        """Per-asset count of fills and drops."""
        if not self.events:
            return pd.DataFrame(columns=["fill", "drop"], dtype=int)
        df = pd.DataFrame([(e.asset, e.action) for e in self.events], columns=["asset", "action"])
        counts = pd.crosstab(df["asset"], df["action"])
        return counts.reindex(columns=["fill", "drop"], fill_value=0)

    def to_text(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.events)

    def __len__(self) -> int:
        return len(self.events)


def clean_prices(panel: pd.DataFrame) -> tuple[pd.DataFrame, CleaningLog]:
    """Repair missing and non-positive prices.

    Invalid cells (NaN, infinite, or <= 0) are forward-filled from the most
    recent valid price of the same asset.  Leading rows that still hold an
    invalid cell afterwards have no predecessor to fill from and are dropped.

    Returns
    -------
    cleaned : pandas.DataFrame
    log : CleaningLog
        One ``fill`` event per repaired cell and one ``drop`` event per asset
        of each dropped row.

    Raises
    ------
    DataError
        If an asset has no valid price at all.
    """
    if panel.shape[1] == 0:
        raise DataError("price panel has no asset columns")
    values = panel.to_numpy(dtype=np.float64, copy=True)
    with np.errstate(invalid="ignore"):
        invalid = ~np.isfinite(values) | (values <= 0)
    for j, asset in enumerate(panel.columns):
        if invalid[:, j].all():
            raise DataError(f"asset '{asset}' has no valid prices")
    values[invalid] = np.nan
    filled = pd.DataFrame(values, index=panel.index, columns=panel.columns).ffill()

    first_complete = int(np.argmax(filled.notna().all(axis=1).to_numpy())) if len(filled) else 0
    log = CleaningLog()
    assets = list(panel.columns)
    for i, date in enumerate(panel.index):
        if i < first_complete:
            log.events.extend(CleaningEvent(date, a, "drop") for a in assets)
        else:
            log.events.extend(
                CleaningEvent(date, a, "fill") for j, a in enumerate(assets) if invalid[i, j]
            )
    cleaned = filled.iloc[first_complete:]
    if len(log):
        logger.info("cleaning: %d fills, %d row(s) dropped", sum(e.action == "fill" for e in log.events), first_complete)
    return cleaned, log


def log_returns(panel: pd.DataFrame) -> pd.DataFrame:
    """Daily log returns ``ln(p_t / p_{t-1})``, one row fewer than ``panel``."""
    prices = check_price_panel(panel, min_rows=2)
    values = prices.to_numpy()
    returns = np.log(values[1:] / values[:-1])
    return pd.DataFrame(returns, index=prices.index[1:], columns=prices.columns)


def reconstruct_prices(returns: pd.DataFrame, initial_prices, initial_date=None) -> pd.DataFrame:
    """Inverse of :func:`log_returns` given the first row of prices."""
    initial = np.asarray(initial_prices, dtype=np.float64)
    growth = np.exp(np.cumsum(returns.to_numpy(), axis=0))
    values = np.vstack([initial, initial * growth])
    if initial_date is None:
        index = pd.RangeIndex(len(values))
    else:
        index = pd.Index([initial_date]).append(returns.index)
    return pd.DataFrame(values, index=index, columns=returns.columns)


def summarize(panel: pd.DataFrame) -> pd.DataFrame:
    """Per-asset mean, median, sample std, min and max of a clean panel.

    A single observation has a standard deviation of 0.
    """
    prices = check_price_panel(panel, min_rows=1)
    std = prices.std(ddof=1) if len(prices) > 1 else pd.Series(0.0, index=prices.columns)
    # rounding in the two-pass variance leaves ~1e-12 on constant columns
    std[prices.max() == prices.min()] = 0.0
    return pd.DataFrame(
        {
            "mean": prices.mean(),
            "median": prices.median(),
            "std": std,
            "min": prices.min(),
            "max": prices.max(),
        }
    )


@dataclass(frozen=True)
class SplitPair:
    train: pd.DataFrame
    test: pd.DataFrame
    ratio: float


def split(frame: pd.DataFrame, ratio: float = 0.8) -> SplitPair:
    """Chronological train/test split with ``floor(ratio * T)`` training rows."""
    if not 0.0 < ratio < 1.0:
        raise DataError(f"split ratio must lie in (0, 1), got {ratio}")
    n = len(frame)
    if n == 0:
        raise DataError("cannot split an empty panel")
    # guard against e.g. 0.57 * 100 == 56.99999999999999
    n_train = math.floor(ratio * n + 1e-9)
    if n_train == 0 or n_train == n:
        raise DataError(f"ratio {ratio} on {n} rows leaves an empty side")
    return SplitPair(frame.iloc[:n_train], frame.iloc[n_train:], ratio)


class PriceCleaner(TransformerMixin, BaseEstimator):
    """Transformer wrapping :func:`clean_prices`.

    Attributes
    ----------
    cleaning_log_ : CleaningLog
        Log produced on the data passed to :meth:`fit`.
    """

    def fit(self, X, y=None):
        X = _as_price_frame(X)
        _, self.cleaning_log_ = clean_prices(X)
        self.feature_names_in_ = np.asarray(X.columns, dtype=object)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        return clean_prices(_as_price_frame(X))[0]

    def fit_transform(self, X, y=None, **fit_params):
        X = _as_price_frame(X)
        cleaned, self.cleaning_log_ = clean_prices(X)
        self.feature_names_in_ = np.asarray(X.columns, dtype=object)
        self.n_features_in_ = X.shape[1]
        return cleaned


class LogReturnTransformer(TransformerMixin, BaseEstimator):
    """Map prices to daily log returns; :meth:`inverse_transform` undoes it."""

    def fit(self, X, y=None):
        X = check_price_panel(X, min_rows=1)
        self.initial_prices_ = X.iloc[0].to_numpy()
        self.initial_date_ = X.index[0]
        self.feature_names_in_ = np.asarray(X.columns, dtype=object)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        return log_returns(X)

    def inverse_transform(self, X):
        X = check_panel(X, what="return panel")
        return reconstruct_prices(X, self.initial_prices_, self.initial_date_)


def _as_price_frame(X) -> pd.DataFrame:
    if isinstance(X, pd.DataFrame):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return pd.DataFrame(arr, columns=[f"asset_{i}" for i in range(arr.shape[1])])
