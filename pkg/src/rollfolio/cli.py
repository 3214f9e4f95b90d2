"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (stage, checker or metric error),
2 usage or I/O error.

Settings resolve as: command-line flag, then ``ROLLFOLIO_<KEY>`` environment
variable, then ``--config`` file (flat ``key = value`` lines), then default.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from rollfolio.backtest import read_backtest, run_static
from rollfolio.exceptions import RollfolioError, StageError
from rollfolio.market_data import clean_prices, load_prices, log_returns, split, write_prices
from rollfolio.metrics import MetricsConfig, compare_with_benchmark, full_report
from rollfolio.optimizer import OptimizerConfig, optimize_rolling, optimize_static
from rollfolio.pipeline.artifacts import read_manifest
from rollfolio.pipeline.checker import check_artifacts
from rollfolio.pipeline.crew import CrewPlan, load_run_metrics, run_crew
from rollfolio.pipeline.report import fmt
from rollfolio.schedule import WeightSchedule, equal_weights

ENV_PREFIX = "ROLLFOLIO_"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


@dataclass
class CliConfig:
    data: str | None = None
    benchmark: str | None = None
    out: str | None = None
    ratio: float = 0.8
    window: int = 30
    holding: int = 30
    risk_free_rate: float = 0.0
    periods_per_year: float = 252.0
    seed: int = 0
    delimiter: str = ","
    verbosity: int = 0

    def metrics(self) -> MetricsConfig:
        return MetricsConfig(risk_free_rate=self.risk_free_rate,
                             periods_per_year=self.periods_per_year)

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(seed=self.seed)

    def plan(self, crew: str) -> CrewPlan:
        return CrewPlan(crew, self.metrics(), self.optimizer(), split_ratio=self.ratio,
                        window=self.window, holding=self.holding, delimiter=self.delimiter)


class UsageError(Exception):
    pass


def read_config_file(path) -> dict[str, str]:
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def resolve_config(args: argparse.Namespace, environ=os.environ) -> CliConfig:
    """Merge defaults, config file, environment and flags into a CliConfig."""
    merged: dict[str, object] = {}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for f in fields(CliConfig):
        env = environ.get(ENV_PREFIX + f.name.upper())
        if env is not None:
            merged[f.name] = env
        flag = getattr(args, f.name, None)
        if flag is not None:
            merged[f.name] = flag
    unknown = set(merged) - {f.name for f in fields(CliConfig)}
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    cfg = CliConfig()
    for f in fields(CliConfig):
        if f.name in merged:
            default = getattr(cfg, f.name)
            caster = type(default) if default is not None else str
            try:
                setattr(cfg, f.name, caster(merged[f.name]))
            except ValueError:
                raise UsageError(f"bad value for {f.name}: {merged[f.name]!r}") from None
    return cfg


def _require(cfg: CliConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) in (None, "")]
    if missing:
        raise UsageError("missing required setting(s): " + ", ".join(f"--{n}" for n in missing))


def cmd_run(args, cfg: CliConfig) -> int:
    _require(cfg, "data", "out")
    if not Path(cfg.data).is_file():
        raise UsageError(f"dataset not found: {cfg.data}")
    result = run_crew(cfg.plan(args.crew), cfg.data, cfg.out)
    print(result.report.text, end="")
    return EXIT_OK


def _checked(run_dir) -> list:
    try:
        records = read_manifest(run_dir)
    except FileNotFoundError:
        raise UsageError(f"no manifest in {run_dir}") from None
    result = check_artifacts(records, run_dir)
    if not result.passed:
        print(f"{run_dir}: check failed", file=sys.stderr)
        for finding in result.findings:
            print(f"  {finding}", file=sys.stderr)
        raise _CheckFailed
    return records


class _CheckFailed(Exception):
    pass


def cmd_check(args, cfg: CliConfig) -> int:
    try:
        records = read_manifest(args.run)
    except FileNotFoundError:
        raise UsageError(f"no manifest in {args.run}") from None
    result = check_artifacts(records, args.run)
    print(result.to_text(), end="")
    return EXIT_OK if result.passed else EXIT_FAIL


_ROWS = [
    ("Expected Return", "expected_return"),
    ("Volatility", "volatility"),
    ("Sharpe Ratio", "sharpe_ratio"),
    ("Sortino Ratio", "sortino_ratio"),
    ("Max Drawdown", "max_drawdown"),
    ("Liquidity Risk", "liquidity_risk"),
    ("Regime Change Detection", "regime_change"),
]


def _cell(report, key) -> str:
    value = getattr(report, key)
    if key == "liquidity_risk":
        return "--" if value.value == "NotAssessed" else value.value
    if key == "regime_change":
        return "--" if value is None else ("Yes" if value else "No")
    return fmt(value)


def comparison_table(equal, rep_a, rep_b) -> list[str]:
    lines = [f"{'Metric':<26}{'Equal Weights':>15}{'Crew A':>12}{'Crew B':>12}"]
    for label, key in _ROWS:
        lines.append(f"{label:<26}{_cell(equal, key):>15}{_cell(rep_a, key):>12}{_cell(rep_b, key):>12}")
    return lines


def _better(a, b, higher_is_better: bool) -> str:
    if a is None or b is None or a == b:
        return "tie"
    return "A" if (a > b) == higher_is_better else "B"


def cmd_compare(args, cfg: CliConfig) -> int:
    _checked(args.run_a)
    _checked(args.run_b)
    ma, mb = load_run_metrics(args.run_a), load_run_metrics(args.run_b)
    verdicts = []
    for split_name in ("train", "test"):
        print(f"[{split_name}]")
        equal = ma["baseline_metrics"][split_name]
        a, b = ma["optimized_metrics"][split_name], mb["optimized_metrics"][split_name]
        print("\n".join(comparison_table(equal, a, b)))
        sharpe = _better(a.sharpe_ratio, b.sharpe_ratio, True)
        vol = _better(a.volatility, b.volatility, False)
        verdicts += [sharpe, vol]
        print(f"higher Sharpe: {sharpe}; lower volatility: {vol}\n")
    decided = {v for v in verdicts if v != "tie"}
    if not decided:
        overall = "tie"
    elif len(decided) == 1:
        overall = f"Crew {decided.pop()} dominates"
    else:
        overall = "mixed"
    print(f"dominance: {overall}")
    return EXIT_OK


def cmd_benchmark(args, cfg: CliConfig) -> int:
    _require(cfg, "benchmark")
    records = _checked(args.run)
    by_stage = {r.stage_name: r for r in records}
    side = by_stage["optimized_metrics"].sidecars["backtest_test"]["path"]
    portfolio, _ = read_backtest(Path(args.run) / side)
    bench_prices, _ = clean_prices(load_prices(cfg.benchmark, delimiter=cfg.delimiter))
    if bench_prices.shape[1] != 1:
        raise RollfolioError(f"benchmark file must hold one asset, found {bench_prices.shape[1]}")
    bench = log_returns(bench_prices).iloc[:, 0]
    try:
        comparison = compare_with_benchmark(portfolio, bench, cfg.metrics())
    except RollfolioError as exc:
        print(f"cannot compare with benchmark: {exc} "
              f"(portfolio {portfolio.index[0]:%Y-%m-%d}..{portfolio.index[-1]:%Y-%m-%d})",
              file=sys.stderr)
        return EXIT_FAIL
    print(comparison.to_text(), end="")
    return EXIT_OK


def cmd_tools(args, cfg: CliConfig) -> int:
    _require(cfg, "data")
    prices, _ = clean_prices(load_prices(cfg.data, delimiter=cfg.delimiter))
    if args.tool == "split":
        pair = split(prices, cfg.ratio)
        print(f"train_rows={len(pair.train)}\ntest_rows={len(pair.test)}")
        if cfg.out:
            out = Path(cfg.out)
            out.mkdir(parents=True, exist_ok=True)
            write_prices(pair.train, out / "train.csv")
            write_prices(pair.test, out / "test.csv")
        return EXIT_OK
    returns = log_returns(prices)
    if args.tool == "metrics":
        if args.weights:
            weights = WeightSchedule.from_csv(args.weights).final_weights
        else:
            weights = equal_weights(returns.columns)
        series = run_static(returns, weights).portfolio_returns
        print(full_report(series, weights=weights, cfg=cfg.metrics()).to_kv(precision=4), end="")
        return EXIT_OK
    if args.rolling:
        schedule = optimize_rolling(returns, cfg.metrics(), cfg.optimizer(),
                                    window=cfg.window, holding=cfg.holding)
    else:
        result = optimize_static(returns, cfg.metrics(), cfg.optimizer())
        schedule = WeightSchedule.constant(result.weights, returns.index[0], returns.index[-1])
    text = schedule.to_csv(cfg.out)
    if not cfg.out:
        print(text, end="")
    return EXIT_OK


def _add_settings(p: argparse.ArgumentParser, *names: str) -> None:
    specs = {
        "data": dict(help="price file (date column + one column per ticker)"),
        "benchmark": dict(help="single-asset benchmark price file"),
        "out": dict(help="output directory or file"),
        "ratio": dict(type=float, help="train fraction of price rows (default 0.8)"),
        "window": dict(type=int, help="rolling estimation window in rows (default 30)"),
        "holding": dict(type=int, help="rows between rebalances (default 30)"),
        "risk_free_rate": dict(type=float, help="annualized risk-free rate (default 0)"),
        "periods_per_year": dict(type=float, help="annualization periods (default 252)"),
        "seed": dict(type=int, help="optimizer restart seed (default 0)"),
        "delimiter": dict(help="input field delimiter (default ',')"),
    }
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, **specs[name])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rollfolio", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="flat key = value settings file")
    parser.add_argument("-v", "--verbose", dest="verbosity", action="count", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run crew A (static) or B (rolling)")
    p.add_argument("crew", type=str.upper, choices=["A", "B"])
    _add_settings(p, "data", "out", "ratio", "window", "holding", "risk_free_rate",
                  "periods_per_year", "seed", "delimiter")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="side-by-side metrics of two checked runs")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", help="verify a run directory")
    p.add_argument("run")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("benchmark", help="compare a run's test period with a benchmark")
    p.add_argument("run")
    _add_settings(p, "benchmark", "risk_free_rate", "periods_per_year", "delimiter")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("tools", help="run a single stage on raw files")
    p.add_argument("tool", choices=["split", "metrics", "optimize"])
    p.add_argument("--weights", help="weight file for 'metrics' (default: equal weights)")
    p.add_argument("--rolling", action="store_true", help="rolling schedule for 'optimize'")
    _add_settings(p, "data", "out", "ratio", "window", "holding", "risk_free_rate",
                  "periods_per_year", "seed", "delimiter")
    p.set_defaults(func=cmd_tools)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (UsageError, OSError) as exc:
        print(f"rollfolio: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(cfg.verbosity, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"rollfolio: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _CheckFailed:
        return EXIT_FAIL
    except StageError as exc:
        print(f"rollfolio: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (RollfolioError, ValueError) as exc:
        print(f"rollfolio: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"rollfolio: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
