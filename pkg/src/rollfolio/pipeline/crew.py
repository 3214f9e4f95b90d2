"""Run a crew: the eight stages from raw prices to the final report.

Each stage reads only the payloads of earlier artifacts and writes exactly
one new artifact.  Re-running into the same directory reuses every artifact
whose payload is intact and whose inputs and parameters are unchanged, so
deleting a downstream file recomputes only from that stage on.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from rollfolio.backtest import run_schedule
from rollfolio.exceptions import StageError
from rollfolio.market_data import clean_prices, load_prices, log_returns, split, write_prices
from rollfolio.metrics import MetricsConfig, full_report
from rollfolio.optimizer import OptimizerConfig, optimize_rolling, optimize_static
from rollfolio.pipeline.artifacts import (
    FAILURE_NAME,
    StageArtifact,
    digest_bytes,
    digest_file,
    read_manifest,
    write_manifest,
)
from rollfolio.pipeline.checker import check_artifacts
from rollfolio.pipeline.payloads import dump_kv, dump_metrics_sections, parse_metrics_sections, parse_split
from rollfolio.pipeline.report import FinalReport, render_final_report
from rollfolio.schedule import WeightSchedule, equal_weights
from rollfolio.utils.validation import format_date

logger = logging.getLogger(__name__)

STAGES = (
    "loader",
    "cleaner",
    "splitter",
    "baseline_metrics",
    "optimizer",
    "optimized_metrics",
    "checker",
    "final_report",
)
DEPENDS_ON = {
    "loader": (),
    "cleaner": ("loader",),
    "splitter": ("cleaner",),
    "baseline_metrics": ("cleaner", "splitter"),
    "optimizer": ("cleaner", "splitter"),
    "optimized_metrics": ("cleaner", "splitter", "optimizer"),
    "checker": STAGES[:6],
    "final_report": ("baseline_metrics", "optimized_metrics", "checker"),
}


@dataclass(frozen=True)
class CrewPlan:
    """Configuration of one crew.  Crews A and B differ only in the optimizer stage."""

    crew_id: str
    metrics: MetricsConfig = MetricsConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    split_ratio: float = 0.8
    window: int = 30
    holding: int = 30
    delimiter: str = ","
    degradation_margin: float = 0.10

    def __post_init__(self):
        crew = str(self.crew_id).upper()
        if crew not in ("A", "B"):
            raise ValueError(f"crew_id must be 'A' or 'B', got {self.crew_id!r}")
        object.__setattr__(self, "crew_id", crew)

    @property
    def stages(self) -> tuple[str, ...]:
        return STAGES

    def fingerprint(self) -> str:
        params = asdict(self)
        params["optimizer"]["fallback_policy"] = self.optimizer.fallback_policy.value
        return digest_bytes(json.dumps(params, sort_keys=True, default=str).encode())


@dataclass
class StageOutput:
    payload: bytes
    schema_tag: str
    sidecars: dict[str, bytes] = field(default_factory=dict)


@dataclass
class RunResult:
    report: FinalReport | None
    manifest: list[StageArtifact]
    executed: list[str]
    reused: list[str]


class _Context:
    """Read access to the artifacts produced so far in a run."""

    def __init__(self, plan: CrewPlan, dataset: Path, run_dir: Path):
        self.plan = plan
        self.dataset = dataset
        self.run_dir = run_dir
        self.records: dict[str, StageArtifact] = {}

    def path(self, stage: str) -> Path:
        return self.run_dir / self.records[stage].payload_path

    def sidecar(self, stage: str, name: str) -> Path:
        return self.run_dir / self.records[stage].sidecars[name]["path"]

    def text(self, stage: str) -> str:
        return self.path(stage).read_text()

    def prices(self):
        return load_prices(self.path("cleaner"))

    def split_returns(self):
        """Train/test log returns, each computed within its own side of the split."""
        info = parse_split(self.text("splitter"))
        prices = self.prices()
        train = prices.iloc[: info["train_rows"]]
        test = prices.iloc[info["train_rows"]:]
        return log_returns(train), log_returns(test)


def _stage_loader(ctx: _Context) -> StageOutput:
    panel = load_prices(ctx.dataset, delimiter=ctx.plan.delimiter)
    return StageOutput(write_prices(panel).encode(), "price_panel/v1")


def _stage_cleaner(ctx: _Context) -> StageOutput:
    cleaned, log = clean_prices(load_prices(ctx.path("loader")))
    return StageOutput(write_prices(cleaned).encode(), "clean_price_panel/v1",
                       {"log": log.to_text().encode()})


def _stage_splitter(ctx: _Context) -> StageOutput:
    prices = ctx.prices()
    pair = split(prices, ctx.plan.split_ratio)
    for side, frame in (("train", pair.train), ("test", pair.test)):
        if len(frame) < 3:
            raise ValueError(f"{side} side has {len(frame)} rows; at least 3 are needed")
    payload = dump_kv([
        ("ratio", repr(pair.ratio)),
        ("n_rows", len(prices)),
        ("train_rows", len(pair.train)),
        ("test_rows", len(pair.test)),
        ("train_start", format_date(pair.train.index[0])),
        ("train_end", format_date(pair.train.index[-1])),
        ("test_start", format_date(pair.test.index[0])),
        ("test_end", format_date(pair.test.index[-1])),
    ])
    return StageOutput(payload.encode(), "split/v1")


def _evaluate(train, test, schedule: WeightSchedule, cfg: MetricsConfig):
    bt_train = run_schedule(train, schedule.restrict(train.index[0], train.index[-1]))
    bt_test = run_schedule(test, schedule.restrict(test.index[0], test.index[-1]))
    reports = {
        "train": full_report(bt_train.portfolio_returns,
                             weights=bt_train.applied_weights.final_weights, cfg=cfg),
        "test": full_report(bt_test.portfolio_returns,
                            weights=bt_test.applied_weights.final_weights,
                            train_context=bt_train.portfolio_returns, cfg=cfg),
    }
    return reports, bt_train, bt_test


def _stage_baseline_metrics(ctx: _Context) -> StageOutput:
    train, test = ctx.split_returns()
    weights = equal_weights(train.columns)
    schedule = WeightSchedule.constant(weights, train.index[0], test.index[-1])
    reports, _, _ = _evaluate(train, test, schedule, ctx.plan.metrics)
    return StageOutput(dump_metrics_sections(reports).encode(), "metrics/v1")


def _stage_optimizer(ctx: _Context) -> StageOutput:
    plan = ctx.plan
    if plan.crew_id == "A":
        train, test = ctx.split_returns()
        result = optimize_static(train, plan.metrics, plan.optimizer)
        schedule = WeightSchedule.constant(result.weights, train.index[0], test.index[-1])
    else:
        # rolling windows may reach back into late training rows, never forward
        returns = log_returns(ctx.prices())
        schedule = optimize_rolling(returns, plan.metrics, plan.optimizer,
                                    window=plan.window, holding=plan.holding)
    return StageOutput(schedule.to_csv().encode(), "weight_schedule/v1")


def _stage_optimized_metrics(ctx: _Context) -> StageOutput:
    train, test = ctx.split_returns()
    schedule = WeightSchedule.from_csv(ctx.path("optimizer"))
    reports, bt_train, bt_test = _evaluate(train, test, schedule, ctx.plan.metrics)
    return StageOutput(
        dump_metrics_sections(reports).encode(), "metrics/v1",
        {"backtest_train": bt_train.to_csv().encode(),
         "backtest_test": bt_test.to_csv().encode()},
    )


def _stage_checker(ctx: _Context) -> StageOutput:
    result = check_artifacts(list(ctx.records.values()), ctx.run_dir)
    if not result.passed:
        raise ValueError("artifact check failed:\n" + "\n".join(map(str, result.findings)))
    return StageOutput(result.to_text().encode(), "check_findings/v1")


def _stage_final_report(ctx: _Context) -> StageOutput:
    report = render_final_report(list(ctx.records.values()), ctx.run_dir, ctx.plan.crew_id,
                                 ctx.plan.degradation_margin)
    return StageOutput(report.text.encode(), "final_report/v1", {"kv": report.to_kv().encode()})


_STAGE_FUNCS = {
    "loader": _stage_loader,
    "cleaner": _stage_cleaner,
    "splitter": _stage_splitter,
    "baseline_metrics": _stage_baseline_metrics,
    "optimizer": _stage_optimizer,
    "optimized_metrics": _stage_optimized_metrics,
    "checker": _stage_checker,
    "final_report": _stage_final_report,
}
_EXTENSIONS = {
    "price_panel/v1": "csv",
    "clean_price_panel/v1": "csv",
    "split/v1": "txt",
    "metrics/v1": "ini",
    "weight_schedule/v1": "csv",
    "check_findings/v1": "txt",
    "final_report/v1": "txt",
}

_SIDECAR_SUFFIX = {"backtest_train": ".csv", "backtest_test": ".csv"}


def _reusable(rec: StageArtifact | None, inputs: list[str], params: str, run_dir: Path) -> bool:
    if rec is None or rec.input_digests != inputs or rec.params_digest != params:
        return False
    if digest_file(run_dir / rec.payload_path) != rec.content_digest:
        return False
    return all(digest_file(run_dir / s["path"]) == s["digest"] for s in rec.sidecars.values())


def _write(run_dir: Path, name: str, data: bytes) -> str:
    (run_dir / name).write_bytes(data)
    return name


def run_crew(plan: CrewPlan, dataset, run_dir) -> RunResult:
    """Execute or resume every stage of ``plan`` on ``dataset`` inside ``run_dir``.

    Raises
    ------
    StageError
        Naming the failed stage.  Artifacts of earlier stages are kept, and
        ``failure.json`` records the failure.
    """
    dataset = Path(dataset)
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    try:
        previous = {r.stage_name: r for r in read_manifest(run_dir)}
    except (FileNotFoundError, ValueError, KeyError):
        previous = {}
    data_digest = digest_file(dataset)
    if data_digest is None:
        raise FileNotFoundError(f"dataset not found: {dataset}")
    params = digest_bytes(f"{plan.fingerprint()}:{data_digest}".encode())

    ctx = _Context(plan, dataset, run_dir)
    executed, reused = [], []
    failure_path = run_dir / FAILURE_NAME
    for number, stage in enumerate(plan.stages, start=1):
        inputs = [ctx.records[dep].content_digest for dep in DEPENDS_ON[stage]]
        old = previous.get(stage)
        if _reusable(old, inputs, params, run_dir):
            ctx.records[stage] = old
            reused.append(stage)
            continue
        try:
            out = _STAGE_FUNCS[stage](ctx)
        except Exception as exc:
            write_manifest(run_dir, list(ctx.records.values()))
            failure_path.write_text(json.dumps(
                {"stage": stage, "error": str(exc), "at": _now()}, indent=2) + "\n")
            logger.error("stage %s failed: %s", stage, exc)
            raise StageError(stage, str(exc)) from exc
        stem = f"{number:02d}_{stage}"
        payload_path = _write(run_dir, f"{stem}.{_EXTENSIONS[out.schema_tag]}", out.payload)
        sidecars = {
            name: {"path": _write(run_dir, f"{stem}.{name}{_SIDECAR_SUFFIX.get(name, '')}", data),
                   "digest": digest_bytes(data)}
            for name, data in out.sidecars.items()
        }
        ctx.records[stage] = StageArtifact(
            stage_name=stage,
            produced_at=_now(),
            input_digests=inputs,
            content_digest=digest_bytes(out.payload),
            payload_path=payload_path,
            schema_tag=out.schema_tag,
            params_digest=params,
            sidecars=sidecars,
        )
        executed.append(stage)
        logger.info("stage %s -> %s", stage, payload_path)
        write_manifest(run_dir, list(ctx.records.values()))

    if failure_path.exists():
        failure_path.unlink()
    records = list(ctx.records.values())
    report = render_final_report(records, run_dir, plan.crew_id, plan.degradation_margin)
    return RunResult(report, records, executed, reused)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def load_run_metrics(run_dir) -> dict[str, dict]:
    """Baseline and optimized metrics sections of a finished run, keyed by stage."""
    records = {r.stage_name: r for r in read_manifest(run_dir)}
    out = {}
    for stage in ("baseline_metrics", "optimized_metrics"):
        out[stage] = parse_metrics_sections((Path(run_dir) / records[stage].payload_path).read_text())
    return out


def crew_of(run_dir) -> str | None:
    """Crew id recorded in a run's final-report sidecar, if present."""
    records = {r.stage_name: r for r in read_manifest(run_dir)}
    rec = records.get("final_report")
    if rec is None or "kv" not in rec.sidecars:
        return None
    for line in (Path(run_dir) / rec.sidecars["kv"]["path"]).read_text().splitlines():
        if line.startswith("crew="):
            return line.partition("=")[2]
    return None


__all__ = ["CrewPlan", "RunResult", "STAGES", "crew_of", "load_run_metrics", "run_crew"]
