"""Long-only, fully invested Sharpe-ratio maximization.

The search is projected gradient ascent on the probability simplex with a
backtracking line search, started from equal weights plus seeded random
simplex points.  Each local optimum is then refined by solving for the
tangency portfolio on its support.  :func:`grid_oracle` enumerates a simplex
lattice and exists to check the search.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from rollfolio.exceptions import DataError, UndefinedMetricError
from rollfolio.metrics import DEFAULT_CONFIG, MetricsConfig, sharpe_ratio
from rollfolio.schedule import ScheduleEntry, WeightSchedule, equal_weights
from rollfolio.simplex import project_simplex
from rollfolio.utils.validation import check_panel, check_weights

logger = logging.getLogger(__name__)

__all__ = [
    "FallbackPolicy",
    "OptimizerConfig",
    "OptimizationResult",
    "SharpeObjective",
    "grid_oracle",
    "lattice_points",
    "optimize_rolling",
    "optimize_static",
    "sharpe_objective",
]

_ARMIJO = 1e-4
_MIN_STEP = 1e-14
_MAX_STEP = 1e6
_SUPPORT_TOL = 1e-12


class FallbackPolicy(str, enum.Enum):
    EQUAL_WEIGHTS = "equal_weights"
    CARRY_FORWARD = "carry_forward"


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 16
    max_iterations: int = 500
    convergence_tol: float = 1e-8
    step_shrink: float = 0.5
    seed: int = 0
    fallback_policy: FallbackPolicy = FallbackPolicy.EQUAL_WEIGHTS

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be > 0")
        if not 0 < self.step_shrink < 1:
            raise ValueError("step_shrink must lie in (0, 1)")
        object.__setattr__(self, "fallback_policy", FallbackPolicy(self.fallback_policy))


def sharpe_objective(w, returns: pd.DataFrame, cfg: MetricsConfig = DEFAULT_CONFIG) -> float:
    """Annualized Sharpe ratio of the daily portfolio ``returns @ w``.

    Raises
    ------
    UndefinedMetricError
        If the portfolio series has zero variance; the search treats this
        as minus infinity.
    """
    panel = check_panel(returns, min_rows=2, what="return panel")
    weights = check_weights(w, panel.columns)
    return sharpe_ratio(panel.to_numpy() @ weights.to_numpy(), cfg)


class SharpeObjective:
    """Sharpe ratio and its gradient from the sample mean and covariance.

    Extended to all of R^n, so the gradient is the unconstrained one.
    """

    def __init__(self, returns: np.ndarray, cfg: MetricsConfig = DEFAULT_CONFIG):
        X = np.asarray(returns, dtype=np.float64)
        centered = X - X.mean(axis=0)
        # constant columns carry exactly zero variance, not rounding residue
        centered[:, np.ptp(X, axis=0) == 0] = 0.0
        self.mean = X.mean(axis=0)
        self.cov = centered.T @ centered / (X.shape[0] - 1)
        self.periods = float(cfg.periods_per_year)
        self.rf = float(cfg.risk_free_rate)
        self._var_floor = 1e-14 * max(float(np.max(np.diag(self.cov))), 0.0)

    def value(self, w: np.ndarray) -> float:
        var = float(w @ self.cov @ w)
        if var <= self._var_floor:
            return -math.inf
        return (self.periods * float(self.mean @ w) - self.rf) / math.sqrt(self.periods * var)

    def gradient(self, w: np.ndarray) -> np.ndarray:
        cov_w = self.cov @ w
        var = float(w @ cov_w)
        s = math.sqrt(self.periods * var)
        excess = self.periods * float(self.mean @ w) - self.rf
        return self.periods * self.mean / s - excess * self.periods * cov_w / s**3

    def tangency(self, support: np.ndarray) -> np.ndarray | None:
        """Stationary point of the ratio restricted to ``support``, if long-only."""
        idx = np.flatnonzero(support)
        excess = self.mean[idx] - self.rf / self.periods
        try:
            z = np.linalg.solve(self.cov[np.ix_(idx, idx)], excess)
        except np.linalg.LinAlgError:
            return None
        total = z.sum()
        if not np.isfinite(z).all() or total == 0:
            return None
        z = z / total
        if z.min() < 0:
            return None
        w = np.zeros_like(self.mean)
        w[idx] = z
        return w


def _ascend(obj: SharpeObjective, w0: np.ndarray, cfg: OptimizerConfig):
    w = project_simplex(w0)
    f = obj.value(w)
    if not math.isfinite(f):
        return w, f, 0
    g = obj.gradient(w)
    step = 1.0
    n_iter = 0
    for n_iter in range(1, cfg.max_iterations + 1):
        while True:
            cand = project_simplex(w + step * g)
            f_cand = obj.value(cand)
            if f_cand >= f + _ARMIJO * float(g @ (cand - w)):
                break
            step *= cfg.step_shrink
            if step < _MIN_STEP:
                return w, f, n_iter
        gain = f_cand - f
        w, f = cand, f_cand
        if gain <= cfg.convergence_tol:
            break
        g = obj.gradient(w)
        step = min(step / cfg.step_shrink, _MAX_STEP)
    return w, f, n_iter


def _refine(obj: SharpeObjective, w: np.ndarray, f: float):
    polished = obj.tangency(w > _SUPPORT_TOL)
    if polished is not None:
        f_pol = obj.value(polished)
        if f_pol > f:
            return polished, f_pol
    return w, f


def _snap(w: np.ndarray) -> np.ndarray:
    w = np.maximum(w, 0.0)
    return w / w.sum()


@dataclass
class OptimizationResult:
    """Outcome of one static optimization.

    ``objective`` is the annualized Sharpe ratio of ``weights`` on the input
    panel, or ``None`` when every start was degenerate and a fallback was
    used.
    """

    weights: pd.Series
    objective: float | None
    fallback: bool = False
    n_iter: int = 0


def _start_points(n: int, cfg: OptimizerConfig) -> list[np.ndarray]:
    rng = np.random.default_rng(cfg.seed)
    starts = [np.full(n, 1.0 / n)]
    if cfg.restarts > 1:
        starts.extend(rng.dirichlet(np.ones(n), size=cfg.restarts - 1))
    return starts


def _series_objective(X: np.ndarray, w: np.ndarray, mcfg: MetricsConfig) -> float:
    try:
        return sharpe_ratio(X @ w, mcfg)
    except UndefinedMetricError:
        return -math.inf


def optimize_static(returns, mcfg: MetricsConfig = DEFAULT_CONFIG,
                    ocfg: OptimizerConfig = OptimizerConfig(),
                    fallback_weights: pd.Series | None = None) -> OptimizationResult:
    """Maximize the Sharpe ratio over long-only, fully invested weights.

    Parameters
    ----------
    returns : pandas.DataFrame
        Daily log returns, one column per asset, at least 2 rows.
    mcfg, ocfg : MetricsConfig, OptimizerConfig
    fallback_weights : pandas.Series, optional
        Used by the ``carry_forward`` policy when every start is degenerate.

    Returns
    -------
    OptimizationResult
        The best of the multi-start local optima.  Ties on objective go to
        the lexicographically smallest weight vector, so the answer does not
        depend on the order restarts are evaluated in.
    """
    panel = check_panel(returns, min_rows=2, what="return panel")
    assets = list(panel.columns)
    # a fresh C-ordered copy keeps BLAS reductions, and so results, independent of memory layout
    X = np.array(panel.to_numpy(), order="C", copy=True)
    n = len(assets)
    if n == 1:
        w = np.ones(1)
        obj = _series_objective(X, w, mcfg)
        return OptimizationResult(pd.Series(w, index=assets, name="weight"),
                                  obj if math.isfinite(obj) else None)

    objective = SharpeObjective(X, mcfg)
    candidates = []
    total_iter = 0
    for start in _start_points(n, ocfg):
        candidates.append(_snap(project_simplex(start)))
        w, f, it = _ascend(objective, start, ocfg)
        total_iter += it
        if math.isfinite(f):
            w, f = _refine(objective, w, f)
            candidates.append(_snap(w))

    best_w, best_f = None, -math.inf
    for w in candidates:
        f = _series_objective(X, w, mcfg)
        if f > best_f or (f == best_f and best_w is not None and tuple(w) < tuple(best_w)):
            best_w, best_f = w, f

    if not math.isfinite(best_f):
        if ocfg.fallback_policy is FallbackPolicy.CARRY_FORWARD and fallback_weights is not None:
            weights = check_weights(fallback_weights, assets)
        else:
            weights = equal_weights(assets)
        logger.warning("every start point has an undefined Sharpe ratio; falling back to %s",
                       ocfg.fallback_policy.value)
        return OptimizationResult(weights, None, fallback=True, n_iter=total_iter)
    return OptimizationResult(pd.Series(best_w, index=assets, name="weight"), best_f,
                              n_iter=total_iter)


def lattice_points(n_assets: int, resolution: float):
    """Yield every simplex point with coordinates in multiples of ``resolution``.

    Points come in ascending lexicographic order.
    """
    steps = round(1.0 / resolution)
    if not math.isclose(steps * resolution, 1.0, rel_tol=0, abs_tol=1e-9) or steps < 1:
        raise ValueError(f"resolution {resolution} does not divide 1 evenly")

    def compose(remaining, slots):
        if slots == 1:
            yield (remaining,)
            return
        for k in range(remaining + 1):
            for rest in compose(remaining - k, slots - 1):
                yield (k,) + rest

    for counts in compose(steps, n_assets):
        yield np.array(counts, dtype=np.float64) / steps


@dataclass
class OracleResult:
    weights: pd.Series
    objective: float
    n_evaluated: int


def grid_oracle(returns, resolution: float = 0.05,
                mcfg: MetricsConfig = DEFAULT_CONFIG, max_assets: int = 4) -> OracleResult:
    """Exhaustive Sharpe maximization over the simplex lattice.

    Evaluates :func:`sharpe_objective` semantics on every lattice point;
    ties keep the lexicographically first point.
    """
    panel = check_panel(returns, min_rows=2, what="return panel")
    n = panel.shape[1]
    if n > max_assets:
        raise DataError(f"grid oracle limited to {max_assets} assets, got {n}")
    X = np.array(panel.to_numpy(), order="C", copy=True)
    best_w, best_f, count = None, -math.inf, 0
    for w in lattice_points(n, resolution):
        count += 1
        f = _series_objective(X, w, mcfg)
        if f > best_f:
            best_w, best_f = w, f
    if best_w is None:
        raise UndefinedMetricError("Sharpe ratio undefined at every lattice point")
    return OracleResult(pd.Series(best_w, index=panel.columns, name="weight"), best_f, count)


def optimize_rolling(returns, mcfg: MetricsConfig = DEFAULT_CONFIG,
                     ocfg: OptimizerConfig = OptimizerConfig(),
                     window: int = 30, holding: int = 30) -> WeightSchedule:
    """Re-optimize every ``holding`` rows on the trailing ``window`` rows.

    Rebalances happen at rows ``window, window + holding, ...``.  The weights
    found at row ``t`` use rows ``[t - window, t)`` only and govern rows
    ``[t, t + holding)``; the last entry may be shorter.  Rows before the
    first rebalance are a warm-up held at equal weights.
    """
    if window < 2 or holding < 2:
        raise DataError(f"window and holding must be >= 2, got {window} and {holding}")
    panel = check_panel(returns, min_rows=1, what="return panel")
    T = len(panel)
    if T < window + 1:
        raise DataError(f"rolling window {window} needs at least {window + 1} rows, got {T}")
    index = panel.index
    assets = list(panel.columns)

    entries = [ScheduleEntry(index[0], index[window - 1], equal_weights(assets), kind="warmup")]
    logger.debug("warm-up: rows 0-%d held at equal weights", window - 1)
    for t in range(window, T, holding):
        stop = min(t + holding, T)
        result = optimize_static(panel.iloc[t - window:t], mcfg, ocfg,
                                 fallback_weights=entries[-1].weights)
        entries.append(ScheduleEntry(
            index[t], index[stop - 1], result.weights,
            kind="fallback" if result.fallback else "optimized",
            window=(index[t - window], index[t - 1]),
        ))
    return WeightSchedule(entries, window_length=window, holding_period=holding)
