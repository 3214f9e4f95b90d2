"""Coherence checks over a run's artifacts.

Never raises on bad artifacts: every problem becomes a :class:`Finding`.
A run fails iff at least one finding has ``error`` severity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from rollfolio.market_data import load_prices
from rollfolio.metrics import format_number
from rollfolio.pipeline.artifacts import StageArtifact, digest_file
from rollfolio.pipeline.payloads import parse_metrics_sections, parse_split
from rollfolio.pipeline.report import report_numerals
from rollfolio.schedule import WeightSchedule
from rollfolio.utils.validation import check_price_panel, format_date, simplex_violation


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" or "warning"
    stage: str
    code: str
    message: str

    def __str__(self):
        return f"{self.severity}\t{self.stage}\t{self.code}\t{self.message}"


@dataclass
class CheckResult:
    findings: list[Finding] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def to_text(self) -> str:
        if not self.findings:
            return "status=pass\n"
        status = "pass" if self.passed else "fail"
        return f"status={status}\n" + "".join(f"{f}\n" for f in self.findings)


def _parse_payload(schema_tag: str, path: Path):
    if schema_tag == "price_panel/v1":
        return load_prices(path)
    if schema_tag == "clean_price_panel/v1":
        return check_price_panel(load_prices(path))
    if schema_tag == "split/v1":
        return parse_split(path.read_text())
    if schema_tag == "metrics/v1":
        return parse_metrics_sections(path.read_text())
    if schema_tag == "weight_schedule/v1":
        return WeightSchedule.from_csv(path, validate=False)
    if schema_tag in ("check_findings/v1", "final_report/v1"):
        text = path.read_text()
        if not text.strip():
            raise ValueError("empty payload")
        return text
    raise ValueError(f"unknown schema tag '{schema_tag}'")


def check_artifacts(records: list[StageArtifact], run_dir) -> CheckResult:
    """Verify digests, payload schemas and cross-stage coherence."""
    run_dir = Path(run_dir)
    result = CheckResult()

    def error(stage, code, message):
        result.findings.append(Finding("error", stage, code, message))

    parsed = {}
    seen_digests: set[str] = set()
    for rec in records:
        stage = rec.stage_name
        for dep in rec.input_digests:
            if dep not in seen_digests:
                error(stage, "dangling-input", f"input digest {dep[:12]} not produced earlier in this run")
        seen_digests.add(rec.content_digest)

        path = run_dir / rec.payload_path
        actual = digest_file(path)
        if actual is None:
            error(stage, "missing-payload", f"payload {rec.payload_path} not found")
            continue
        if actual != rec.content_digest:
            error(stage, "digest-mismatch", f"payload {rec.payload_path} does not match its digest")
        for name, side in rec.sidecars.items():
            side_digest = digest_file(run_dir / side["path"])
            if side_digest is None:
                error(stage, "missing-payload", f"sidecar {side['path']} not found")
            elif side_digest != side["digest"]:
                error(stage, "digest-mismatch", f"sidecar {side['path']} does not match its digest")
        try:
            parsed[stage] = _parse_payload(rec.schema_tag, path)
        except Exception as exc:  # any parse failure is a finding, not a crash
            error(stage, "schema", f"payload does not parse as {rec.schema_tag}: {exc}")

    _check_split(parsed, error)
    _check_weights(parsed, error)
    _check_metrics(parsed, error)
    _check_report_numerals(parsed, error)
    return result


def _check_split(parsed, error):
    split, cleaned = parsed.get("splitter"), parsed.get("cleaner")
    if split is None:
        return
    if split["train_rows"] + split["test_rows"] != split["n_rows"]:
        error("splitter", "split-size",
              f"train {split['train_rows']} + test {split['test_rows']} != {split['n_rows']} rows")
    if cleaned is not None and len(cleaned) != split["n_rows"]:
        error("splitter", "split-size",
              f"split covers {split['n_rows']} rows but the cleaned panel has {len(cleaned)}")


def _check_weights(parsed, error):
    schedule = parsed.get("optimizer")
    if schedule is None:
        return
    if not schedule.entries:
        error("optimizer", "simplex-violation", "weight schedule is empty")
    for entry in schedule.entries:
        problem = simplex_violation(entry.weights.to_numpy())
        if problem:
            error("optimizer", "simplex-violation",
                  f"entry starting {format_date(entry.start)}: {problem}")
    for prev, cur in zip(schedule.entries, schedule.entries[1:]):
        if not prev.end < cur.start:
            error("optimizer", "schedule-order", f"entries overlap at {format_date(cur.start)}")


def _check_metrics(parsed, error):
    # required keys are already enforced when the blocks are parsed
    for stage in ("baseline_metrics", "optimized_metrics"):
        sections = parsed.get(stage)
        if sections is None:
            continue
        for name in ("train", "test"):
            if name not in sections:
                error(stage, "metrics-keys", f"missing section [{name}]")
        for report in sections.values():
            if report.max_drawdown is not None and not -1 <= report.max_drawdown <= 0:
                error(stage, "metrics-range", f"max_drawdown {report.max_drawdown} outside [-1, 0]")
            if report.volatility is not None and report.volatility < 0:
                error(stage, "metrics-range", f"negative volatility {report.volatility}")


def _check_report_numerals(parsed, error):
    text = parsed.get("final_report")
    if text is None:
        return
    allowed = set()
    for stage in ("baseline_metrics", "optimized_metrics"):
        for report in (parsed.get(stage) or {}).values():
            allowed.update(format_number(v) for v in report.numeric_fields().values())
    for token in report_numerals(text):
        if token not in allowed:
            error("final_report", "report-numeral",
                  f"numeral {token} does not match any metrics artifact field")
