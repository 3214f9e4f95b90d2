"""Deterministic final report for a crew run.

Every number printed comes from a metrics artifact, formatted to four
decimals, so the checker can match each numeral back to its source.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from rollfolio.exceptions import DataError
from rollfolio.metrics import LiquidityRisk, MetricsReport, format_number
from rollfolio.pipeline.artifacts import StageArtifact, artifact_by_stage
from rollfolio.pipeline.payloads import dump_kv, parse_metrics_sections

RATIO_METRICS = [
    ("expected_return", "Expected Return", +1),
    ("volatility", "Volatility", -1),
    ("sharpe_ratio", "Sharpe Ratio", +1),
    ("sortino_ratio", "Sortino Ratio", +1),
    ("max_drawdown", "Max Drawdown", +1),
]
CREW_TITLES = {"A": "static optimization", "B": "rolling optimization"}
_LIQUIDITY_TEXT = {
    LiquidityRisk.LOW: "Low",
    LiquidityRisk.MODERATELY_LOW: "Moderately Low",
    LiquidityRisk.MODERATE: "Moderate",
    LiquidityRisk.HIGH: "High",
    LiquidityRisk.NOT_ASSESSED: "--",
}
# numerals, ignoring the "1." style section enumerators at line start
_NUMERAL = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?")
_ENUMERATOR = re.compile(r"^\s*\d+\.\s")


def fmt(value) -> str:
    return "--" if value is None else format_number(value)


def is_degraded(train, test, direction: int, margin: float) -> bool | None:
    """True when ``test`` is worse than ``train`` by more than ``margin`` relative.

    ``direction`` is +1 when larger is better and -1 when smaller is better.
    """
    if train is None or test is None:
        return None
    if direction > 0:
        return test < train - margin * abs(train)
    return test > train + margin * abs(train)


@dataclass
class FinalReport:
    crew_id: str
    baseline_train: MetricsReport
    baseline_test: MetricsReport
    optimized_train: MetricsReport
    optimized_test: MetricsReport
    optimized_superior: bool | None
    degradation: dict[str, bool | None] = field(default_factory=dict)
    recommend_optimized: bool = False
    text: str = ""

    def to_kv(self) -> str:
        yes_no = {True: "yes", False: "no", None: "undetermined"}
        pairs = [("crew", self.crew_id),
                 ("optimized_superior_on_train", yes_no[self.optimized_superior])]
        for key, _, _ in RATIO_METRICS:
            pairs.append((f"degraded.{key}", yes_no[self.degradation.get(key)]))
        pairs.append(("recommendation", "optimized" if self.recommend_optimized else "equal_weights"))
        for section, report in (("baseline.train", self.baseline_train),
                                ("baseline.test", self.baseline_test),
                                ("optimized.train", self.optimized_train),
                                ("optimized.test", self.optimized_test)):
            for key, value in report.numeric_fields().items():
                pairs.append((f"{section}.{key}", repr(value)))
        return dump_kv(pairs)


def _render(rep: FinalReport) -> str:
    b, o, t = rep.baseline_train, rep.optimized_train, rep.optimized_test
    crew = rep.crew_id
    lines = [f"REPORT CREW {crew}: {CREW_TITLES.get(crew, 'optimization')}", ""]

    lines.append("1. Comparison of Two Approaches (train set)")
    lines.append(f"   {'Metric':<28}{'Equal Weights':>15}{'Optimized':>15}")
    for key, label, _ in RATIO_METRICS:
        lines.append(f"   {label:<28}{fmt(getattr(b, key)):>15}{fmt(getattr(o, key)):>15}")
    lines.append(f"   {'Liquidity Risk (proxy)':<28}{_LIQUIDITY_TEXT[b.liquidity_risk]:>15}"
                 f"{_LIQUIDITY_TEXT[o.liquidity_risk]:>15}")
    lines.append("")

    lines.append("2. Superior Strategy on Train Set")
    if rep.optimized_superior is None:
        lines.append("   Undetermined: a Sharpe ratio is undefined on the train set.")
    else:
        winner = "optimized weights" if rep.optimized_superior else "equal weights"
        lines.append(f"   The {winner} portfolio is superior on the train set "
                     f"(Sharpe ratio {fmt(o.sharpe_ratio)} vs {fmt(b.sharpe_ratio)}).")
    lines.append("")

    lines.append("3. Test Set Performance (optimized weights)")
    for key, label, _ in RATIO_METRICS:
        lines.append(f"   {label}: {fmt(getattr(t, key))}")
    hhi = f" (concentration proxy, HHI {fmt(t.hhi)})" if t.hhi is not None else ""
    lines.append(f"   Liquidity Risk: {_LIQUIDITY_TEXT[t.liquidity_risk]}{hhi}")
    if t.regime_change is None:
        lines.append("   Regime Change Detection: --")
    else:
        lines.append(f"   Regime Change Detection: {'Yes' if t.regime_change else 'No'} "
                     f"(variance ratio {fmt(t.regime_statistic)})")
    lines.append("")

    lines.append("4. Generalization (train to test, optimized weights)")
    for key, label, _ in RATIO_METRICS:
        flag = rep.degradation.get(key)
        state = {True: "degraded", False: "held", None: "not assessed"}[flag]
        lines.append(f"   {label}: {state}, from {fmt(getattr(o, key))} to {fmt(getattr(t, key))}")
    lines.append("")

    lines.append("5. Recommendation")
    bt = rep.baseline_test
    if rep.recommend_optimized:
        lines.append("   Use the optimized strategy: its test-set Sharpe ratio "
                     f"{fmt(t.sharpe_ratio)} beats the equal-weight portfolio's {fmt(bt.sharpe_ratio)}.")
    else:
        lines.append("   Keep the equal-weight portfolio: the optimized test-set Sharpe ratio "
                     f"{fmt(t.sharpe_ratio)} does not beat its {fmt(bt.sharpe_ratio)}.")
    lines.append("   Portfolio returns aggregate asset log returns linearly; costs are not modeled.")
    return "\n".join(lines) + "\n"


def build_final_report(crew_id: str, baseline: dict[str, MetricsReport],
                       optimized: dict[str, MetricsReport], margin: float = 0.10) -> FinalReport:
    """Apply the verdict rules and render the five-section report."""
    b_train, o_train, o_test = baseline["train"], optimized["train"], optimized["test"]
    b_test = baseline["test"]
    superior = None
    if o_train.sharpe_ratio is not None and b_train.sharpe_ratio is not None:
        superior = o_train.sharpe_ratio > b_train.sharpe_ratio
    degradation = {key: is_degraded(getattr(o_train, key), getattr(o_test, key), direction, margin)
                   for key, _, direction in RATIO_METRICS}
    recommend = (o_test.sharpe_ratio is not None and b_test.sharpe_ratio is not None
                 and o_test.sharpe_ratio > b_test.sharpe_ratio)
    rep = FinalReport(crew_id, b_train, b_test, o_train, o_test, superior, degradation, recommend)
    rep.text = _render(rep)
    return rep


def render_final_report(records: list[StageArtifact], run_dir, crew_id: str,
                        margin: float = 0.10) -> FinalReport:
    """Render from the baseline and optimized metrics artifacts of a run."""
    by_stage = artifact_by_stage(records)
    sections = {}
    for stage in ("baseline_metrics", "optimized_metrics"):
        if stage not in by_stage:
            raise DataError(f"missing {stage} artifact")
        text = (Path(run_dir) / by_stage[stage].payload_path).read_text()
        sections[stage] = parse_metrics_sections(text)
    for stage, needed in (("baseline_metrics", ("train", "test")),
                          ("optimized_metrics", ("train", "test"))):
        missing = [s for s in needed if s not in sections[stage]]
        if missing:
            raise DataError(f"{stage} artifact lacks section(s) {', '.join(missing)}")
    return build_final_report(crew_id, sections["baseline_metrics"],
                              sections["optimized_metrics"], margin)


def report_numerals(text: str) -> list[str]:
    """Every numeral token in a rendered report, section enumerators excluded."""
    found = []
    for line in text.splitlines():
        found.extend(_NUMERAL.findall(_ENUMERATOR.sub("", line, count=1)))
    return found
