"""Risk-adjusted performance metrics for a daily portfolio return series.

All inputs are daily log returns.  Annualization multiplies means by
``periods_per_year`` and standard deviations by its square root; standard
deviations use the sample (n - 1) convention throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from rollfolio.exceptions import DataError, UndefinedMetricError
from rollfolio.utils.validation import check_series

__all__ = [
    "BenchmarkComparison",
    "LiquidityRisk",
    "MetricsConfig",
    "MetricsReport",
    "RegimeTest",
    "annualized_return",
    "annualized_volatility",
    "classify_liquidity",
    "compare_with_benchmark",
    "detect_regime_change",
    "full_report",
    "herfindahl",
    "max_drawdown",
    "sharpe_ratio",
    "sortino_ratio",
]


@dataclass(frozen=True)
class MetricsConfig:
    """Conventions shared by every metric.

    Parameters
    ----------
    risk_free_rate : float
        Annualized risk-free rate subtracted in the Sharpe ratio.
    periods_per_year : float
        Observations per year; 252 gives the ``sqrt(252)`` volatility scaling.
    mar : float or None
        Annualized minimum acceptable return for the Sortino ratio. ``None``
        means "same as ``risk_free_rate``".
    regime_var_ratio_threshold : float
        Variance ratio above which a regime change is flagged.
    liquidity_hhi_thresholds : (float, float)
        Concentration cut-offs between Low / moderate / High liquidity risk.
    """

    risk_free_rate: float = 0.0
    periods_per_year: float = 252
    mar: float | None = None
    regime_var_ratio_threshold: float = 2.0
    liquidity_hhi_thresholds: tuple[float, float] = (0.15, 0.30)

    def __post_init__(self):
        if not self.periods_per_year > 0:
            raise ValueError(f"periods_per_year must be > 0, got {self.periods_per_year}")
        lo, hi = self.liquidity_hhi_thresholds
        if not lo < hi:
            raise ValueError(f"liquidity thresholds must be strictly increasing, got {lo}, {hi}")
        if not self.regime_var_ratio_threshold > 1:
            raise ValueError("regime_var_ratio_threshold must exceed 1")

    @property
    def target_return(self) -> float:
        return self.risk_free_rate if self.mar is None else self.mar


DEFAULT_CONFIG = MetricsConfig()


class LiquidityRisk(str, Enum):
    LOW = "Low"
    MODERATELY_LOW = "ModeratelyLow"
    MODERATE = "Moderate"
    HIGH = "High"
    NOT_ASSESSED = "NotAssessed"


def _values(r, min_len: int) -> np.ndarray:
    return check_series(r, min_len=min_len).to_numpy()


def _sample_std(values: np.ndarray) -> float:
    # an exactly constant series has exactly zero dispersion
    if np.ptp(values) == 0:
        return 0.0
    return float(np.std(values, ddof=1))


def annualized_return(r, cfg: MetricsConfig = DEFAULT_CONFIG) -> float:
    """Arithmetic mean of daily returns times ``periods_per_year``."""
    return float(np.mean(_values(r, 1))) * cfg.periods_per_year


def annualized_volatility(r, cfg: MetricsConfig = DEFAULT_CONFIG) -> float:
    """Sample standard deviation of daily returns times ``sqrt(periods_per_year)``."""
    return _sample_std(_values(r, 2)) * math.sqrt(cfg.periods_per_year)


def sharpe_ratio(r, cfg: MetricsConfig = DEFAULT_CONFIG) -> float:
    """Annualized excess return over the risk-free rate per unit of volatility.

    Raises
    ------
    UndefinedMetricError
        If the series has zero volatility.
    """
    vol = annualized_volatility(r, cfg)
    if vol == 0:
        raise UndefinedMetricError("Sharpe ratio undefined: zero volatility")
    return (annualized_return(r, cfg) - cfg.risk_free_rate) / vol


def sortino_ratio(r, cfg: MetricsConfig = DEFAULT_CONFIG) -> float:
    """Excess return over the MAR divided by annualized downside deviation.

    The downside deviation averages squared shortfalls over *all*
    observations, not only the ones below target.
    """
    values = _values(r, 1)
    daily_mar = cfg.target_return / cfg.periods_per_year
    shortfall = np.minimum(values - daily_mar, 0.0)
    if not (shortfall < 0).any():
        raise UndefinedMetricError("Sortino ratio undefined: no observation below the MAR")
    downside = math.sqrt(float(np.mean(shortfall**2))) * math.sqrt(cfg.periods_per_year)
    if downside == 0:
        # shortfalls so small that their squares underflow
        raise UndefinedMetricError("Sortino ratio undefined: zero downside deviation")
    return (annualized_return(values, cfg) - cfg.target_return) / downside


def max_drawdown(r) -> float:
    """Largest peak-to-trough decline of the compounded equity curve.

    The curve starts at 1 before the first return, so an immediate loss
    counts as a drawdown.  Returns a value in ``[-1, 0]``.
    """
    log_wealth = np.cumsum(_values(r, 1))
    peak = np.maximum.accumulate(np.maximum(log_wealth, 0.0))
    return float(min(np.expm1(log_wealth - peak).min(), 0.0))


@dataclass(frozen=True)
class RegimeTest:
    flag: bool
    statistic: float


def detect_regime_change(train, test, cfg: MetricsConfig = DEFAULT_CONFIG) -> RegimeTest:
    """Flag a change when the larger/smaller sample-variance ratio exceeds the threshold."""
    var_train = _sample_std(_values(train, 2)) ** 2
    var_test = _sample_std(_values(test, 2)) ** 2
    if var_train == 0 or var_test == 0:
        raise UndefinedMetricError("regime test undefined: zero variance")
    statistic = max(var_train, var_test) / min(var_train, var_test)
    return RegimeTest(statistic > cfg.regime_var_ratio_threshold, statistic)


def herfindahl(w) -> float:
    values = np.asarray(w, dtype=np.float64)
    return float(np.sum(values**2))


def classify_liquidity(w, cfg: MetricsConfig = DEFAULT_CONFIG) -> LiquidityRisk:
    """Liquidity-risk label from weight concentration (HHI proxy).

    The moderate band between the two thresholds is halved: its lower half is
    ``ModeratelyLow`` and its upper half ``Moderate``.
    """
    hhi = herfindahl(w)
    lo, hi = cfg.liquidity_hhi_thresholds
    if hhi <= lo:
        return LiquidityRisk.LOW
    if hhi <= (lo + hi) / 2:
        return LiquidityRisk.MODERATELY_LOW
    if hhi <= hi:
        return LiquidityRisk.MODERATE
    return LiquidityRisk.HIGH


METRIC_KEYS = (
    "expected_return",
    "volatility",
    "sharpe_ratio",
    "sortino_ratio",
    "max_drawdown",
    "liquidity_risk",
    "hhi",
    "regime_change",
    "regime_statistic",
    "n_obs",
)
NUMERIC_KEYS = ("expected_return", "volatility", "sharpe_ratio", "sortino_ratio",
                "max_drawdown", "hhi", "regime_statistic")
UNDEFINED = "undefined"


@dataclass
class MetricsReport:
    """Metric values for one portfolio series; ``None`` marks an undefined field.

    ``notes`` maps each undefined field to the reason it is undefined.
    """

    expected_return: float | None
    volatility: float | None
    sharpe_ratio: float | None
    sortino_ratio: float | None
    max_drawdown: float | None
    liquidity_risk: LiquidityRisk = LiquidityRisk.NOT_ASSESSED
    hhi: float | None = None
    regime_change: bool | None = None
    regime_statistic: float | None = None
    n_obs: int = 0
    notes: dict[str, str] = field(default_factory=dict)

    def to_kv(self, precision: int | None = None) -> str:
        """One ``key=value`` line per metric.

        Full ``repr`` precision by default; ``precision`` rounds for display.
        """
        lines = []
        for key in METRIC_KEYS:
            lines.append(f"{key}={_format_value(getattr(self, key), precision)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_kv(cls, text: str) -> "MetricsReport":
        raw = _parse_kv(text)
        missing = [k for k in METRIC_KEYS if k not in raw]
        if missing:
            raise DataError(f"metrics block missing keys: {', '.join(missing)}")
        kwargs = {}
        for key in NUMERIC_KEYS:
            kwargs[key] = None if raw[key] == UNDEFINED else float(raw[key])
        kwargs["liquidity_risk"] = LiquidityRisk(raw["liquidity_risk"])
        kwargs["regime_change"] = {"yes": True, "no": False, UNDEFINED: None}[raw["regime_change"]]
        kwargs["n_obs"] = int(raw["n_obs"])
        return cls(**kwargs)

    def numeric_fields(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in NUMERIC_KEYS if getattr(self, k) is not None}


def format_number(value: float, precision: int = 4) -> str:
    return f"{value:.{precision}f}"


def _format_value(value, precision):
    if value is None:
        return UNDEFINED
    if isinstance(value, LiquidityRisk):
        return value.value
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, int):
        return str(value)
    if precision is None:
        return repr(float(value))
    return format_number(value, precision)


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"malformed metrics line: {line!r}")
        out[key.strip()] = value.strip()
    return out


def full_report(r, weights=None, train_context=None,
                cfg: MetricsConfig = DEFAULT_CONFIG) -> MetricsReport:
    """Evaluate every metric, recording undefined fields instead of raising.

    Parameters
    ----------
    r : pandas.Series
        Daily portfolio log returns.
    weights : array-like, optional
        Final weight vector; enables the liquidity proxy.
    train_context : pandas.Series, optional
        In-sample returns; enables regime-change detection against ``r``.
    """
    series = check_series(r, min_len=1)
    notes: dict[str, str] = {}

    def attempt(name, fn, *args):
        try:
            return fn(*args)
        except (UndefinedMetricError, DataError) as exc:
            notes[name] = str(exc)
            return None

    report = MetricsReport(
        expected_return=attempt("expected_return", annualized_return, series, cfg),
        volatility=attempt("volatility", annualized_volatility, series, cfg),
        sharpe_ratio=attempt("sharpe_ratio", sharpe_ratio, series, cfg),
        sortino_ratio=attempt("sortino_ratio", sortino_ratio, series, cfg),
        max_drawdown=attempt("max_drawdown", max_drawdown, series),
        n_obs=len(series),
        notes=notes,
    )
    if weights is not None:
        report.liquidity_risk = classify_liquidity(weights, cfg)
        report.hhi = herfindahl(weights)
    if train_context is not None:
        regime = attempt("regime_change", detect_regime_change, train_context, series, cfg)
        if regime is not None:
            report.regime_change = regime.flag
            report.regime_statistic = regime.statistic
    return report


@dataclass
class BenchmarkComparison:
    portfolio: MetricsReport
    benchmark: MetricsReport
    excess_return: float
    tracking_error: float | None
    n_common: int

    def to_text(self, precision: int = 4) -> str:
        rows = [f"{'metric':<18}{'portfolio':>12}{'benchmark':>12}"]
        for key in NUMERIC_KEYS[:5]:
            p = _format_value(getattr(self.portfolio, key), precision)
            b = _format_value(getattr(self.benchmark, key), precision)
            rows.append(f"{key:<18}{p:>12}{b:>12}")
        rows.append(f"excess_return={_format_value(self.excess_return, precision)}")
        rows.append(f"tracking_error={_format_value(self.tracking_error, precision)}")
        rows.append(f"common_days={self.n_common}")
        return "\n".join(rows) + "\n"


def compare_with_benchmark(portfolio, benchmark,
                           cfg: MetricsConfig = DEFAULT_CONFIG) -> BenchmarkComparison:
    """Compare a portfolio to a benchmark on their common dates.

    Dates are inner-joined; the benchmark is never forward-filled.
    """
    p = check_series(portfolio, what="portfolio returns")
    b = check_series(benchmark, what="benchmark returns")
    common = p.index.intersection(b.index)
    if len(common) == 0:
        raise DataError("portfolio and benchmark share no dates")
    p, b = p.loc[common], b.loc[common]
    diff = p - b
    tracking = annualized_volatility(diff, cfg) if len(common) >= 2 else None
    return BenchmarkComparison(
        portfolio=full_report(p, cfg=cfg),
        benchmark=full_report(b, cfg=cfg),
        excess_return=annualized_return(p, cfg) - annualized_return(b, cfg),
        tracking_error=tracking,
        n_common=len(common),
    )
