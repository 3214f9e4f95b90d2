from __future__ import annotations

import json

import numpy as np
import pytest

from rollfolio.datasets import make_prices
from rollfolio.exceptions import StageError
from rollfolio.market_data import write_prices
from rollfolio.metrics import LiquidityRisk, MetricsReport, format_number
from rollfolio.pipeline import STAGES, CrewPlan, check_artifacts, read_manifest, run_crew
from rollfolio.pipeline.artifacts import FAILURE_NAME, MANIFEST_NAME, digest_file
from rollfolio.pipeline.crew import crew_of, load_run_metrics
from rollfolio.pipeline.payloads import parse_kv
from rollfolio.pipeline.report import build_final_report, is_degraded, report_numerals


def report(sharpe=0.5, **kw):
    fields = dict(expected_return=0.1, volatility=0.2, sharpe_ratio=sharpe, sortino_ratio=0.7,
                  max_drawdown=-0.15, liquidity_risk=LiquidityRisk.LOW, hhi=0.25, n_obs=100)
    fields.update(kw)
    return MetricsReport(**fields)


def flip_byte(path, offset=-5):
    data = bytearray(path.read_bytes())
    data[offset] = ord("7") if data[offset] != ord("7") else ord("3")
    path.write_bytes(bytes(data))


@pytest.fixture(scope="module")
def run_a(tmp_path_factory, small_dataset):
    out = tmp_path_factory.mktemp("runA")
    return run_crew(CrewPlan("A"), small_dataset, out), out


@pytest.fixture(scope="module")
def run_b(tmp_path_factory, small_dataset):
    out = tmp_path_factory.mktemp("runB")
    return run_crew(CrewPlan("B"), small_dataset, out), out


# -- run_crew -------------------------------------------------------------------------

def test_crew_a_full_fixture_eight_artifacts(dataset_1667, tmp_path):
    result = run_crew(CrewPlan("A"), dataset_1667, tmp_path)
    assert [r.stage_name for r in result.manifest] == list(STAGES)
    assert len(read_manifest(tmp_path)) == 8
    split = parse_kv((tmp_path / result.manifest[2].payload_path).read_text())
    assert (split["train_rows"], split["test_rows"]) == ("1333", "334")
    assert result.report.text.startswith("REPORT CREW A")
    assert not (tmp_path / FAILURE_NAME).exists()


def test_manifest_records(run_a):
    result, out = run_a
    lines = (out / MANIFEST_NAME).read_text().splitlines()
    assert len(lines) == 8
    first = json.loads(lines[0])
    assert list(first)[:4] == ["stage", "schema_tag", "digest", "path"]
    assert first["digest_algorithm"] == "sha256"
    for rec in result.manifest:
        assert digest_file(out / rec.payload_path) == rec.content_digest
    seen = set()
    for rec in result.manifest:
        assert set(rec.input_digests) <= seen
        seen.add(rec.content_digest)


def test_report_sections_and_sidecar(run_b):
    result, out = run_b
    text = result.report.text
    for heading in ("1. Comparison of Two Approaches", "2. Superior Strategy", "3. Test Set Performance",
                    "4. Generalization", "5. Recommendation"):
        assert heading in text
    assert "Liquidity Risk" in text and "Regime Change Detection" in text
    assert crew_of(out) == "B"
    kv = parse_kv((out / result.manifest[-1].sidecars["kv"]["path"]).read_text())
    assert kv["recommendation"] in ("optimized", "equal_weights")


def test_report_numerals_come_from_metrics(run_a, run_b):
    for result, out in (run_a, run_b):
        metrics = load_run_metrics(out)
        allowed = {format_number(v) for sections in metrics.values()
                   for rep in sections.values() for v in rep.numeric_fields().values()}
        numerals = report_numerals(result.report.text)
        assert numerals and set(numerals) <= allowed


def test_crews_diverge_from_optimizer_stage(run_a, run_b):
    a = {r.stage_name: r.content_digest for r in run_a[0].manifest}
    b = {r.stage_name: r.content_digest for r in run_b[0].manifest}
    differ = [s for s in STAGES if a[s] != b[s]]
    assert differ == ["optimizer", "optimized_metrics", "final_report"]


def test_crew_b_uses_rolling_schedule(run_b):
    result, out = run_b
    text = (out / result.manifest[4].payload_path).read_text()
    assert text.startswith("# window=30\n# holding=30\n")


def test_replay_identical_digests(small_dataset, run_b, tmp_path):
    again = run_crew(CrewPlan("B"), small_dataset, tmp_path)
    first = [(r.stage_name, r.content_digest, r.payload_path) for r in run_b[0].manifest]
    assert [(r.stage_name, r.content_digest, r.payload_path) for r in again.manifest] == first
    for rec in again.manifest:
        for name, side in rec.sidecars.items():
            assert side["digest"] == run_b[0].manifest[STAGES.index(rec.stage_name)].sidecars[name]["digest"]


def test_crew_b_short_panel_halts_at_optimizer(tmp_path):
    data = tmp_path / "short.csv"
    write_prices(make_prices(n_rows=20, tickers=["A", "B"], seed=1), data)
    with pytest.raises(StageError) as info:
        run_crew(CrewPlan("B"), data, tmp_path / "run")
    assert info.value.stage == "optimizer"
    assert "window" in info.value.message
    failure = json.loads((tmp_path / "run" / FAILURE_NAME).read_text())
    assert failure["stage"] == "optimizer"
    kept = read_manifest(tmp_path / "run")
    assert [r.stage_name for r in kept] == list(STAGES[:4])
    assert check_artifacts(kept, tmp_path / "run").passed


def test_resume_reuses_intact_stages(small_dataset, tmp_path):
    first = run_crew(CrewPlan("A"), small_dataset, tmp_path)
    assert first.executed == list(STAGES)
    again = run_crew(CrewPlan("A"), small_dataset, tmp_path)
    assert again.reused == list(STAGES) and again.executed == []

    (tmp_path / first.manifest[5].payload_path).unlink()
    resumed = run_crew(CrewPlan("A"), small_dataset, tmp_path)
    # the regenerated payload is byte-identical, so later stages see unchanged inputs
    assert resumed.executed == ["optimized_metrics"]
    assert resumed.reused == [s for s in STAGES if s != "optimized_metrics"]

    (tmp_path / first.manifest[6].payload_path).unlink()
    (tmp_path / first.manifest[7].payload_path).unlink()
    tail = run_crew(CrewPlan("A"), small_dataset, tmp_path)
    assert tail.reused == list(STAGES[:6]) and tail.executed == ["checker", "final_report"]
    assert [r.content_digest for r in resumed.manifest] == [r.content_digest for r in first.manifest]


def test_changed_config_recomputes(small_dataset, tmp_path):
    run_crew(CrewPlan("A"), small_dataset, tmp_path)
    other = run_crew(CrewPlan("A", split_ratio=0.7), small_dataset, tmp_path)
    assert other.executed == list(STAGES)


def test_distinct_run_dirs_isolated(small_dataset, tmp_path):
    a = run_crew(CrewPlan("A"), small_dataset, tmp_path / "one")
    b = run_crew(CrewPlan("A"), small_dataset, tmp_path / "two")
    assert [r.content_digest for r in a.manifest] == [r.content_digest for r in b.manifest]


def test_crew_plan_validation():
    assert CrewPlan("b").crew_id == "B"
    with pytest.raises(ValueError):
        CrewPlan("C")
    assert CrewPlan("A").fingerprint() != CrewPlan("A", window=20).fingerprint()


# -- checker -----------------------------------------------------------------------------

def copy_run(src, dst):
    dst.mkdir()
    for p in src.iterdir():
        (dst / p.name).write_bytes(p.read_bytes())
    return dst


def test_check_untampered_passes_idempotently(run_a):
    result, out = run_a
    first = check_artifacts(result.manifest, out)
    assert first.passed and first.findings == []
    assert first.to_text() == "status=pass\n"
    assert check_artifacts(read_manifest(out), out).findings == []


@pytest.mark.parametrize("stage", ["loader", "splitter", "optimizer", "final_report"])
def test_check_byte_flip_names_stage(run_a, tmp_path, stage):
    out = copy_run(run_a[1], tmp_path / "run")
    records = read_manifest(out)
    rec = next(r for r in records if r.stage_name == stage)
    flip_byte(out / rec.payload_path)
    result = check_artifacts(records, out)
    assert not result.passed
    assert any(f.code == "digest-mismatch" and f.stage == stage for f in result.findings)


def test_check_sidecar_tamper(run_a, tmp_path):
    out = copy_run(run_a[1], tmp_path / "run")
    records = read_manifest(out)
    side = records[5].sidecars["backtest_test"]["path"]
    flip_byte(out / side)
    findings = check_artifacts(records, out).findings
    assert any(f.code == "digest-mismatch" and f.stage == "optimized_metrics" for f in findings)


def test_check_weights_summing_to_1_2(run_a, tmp_path):
    out = copy_run(run_a[1], tmp_path / "run")
    records = read_manifest(out)
    path = out / records[4].payload_path
    lines = path.read_text().splitlines()
    header_at = lines.index("start_date,end_date,ticker,weight")
    parts = lines[header_at + 1].split(",")
    parts[3] = repr(float(parts[3]) + 0.2)
    lines[header_at + 1] = ",".join(parts)
    path.write_text("\n".join(lines) + "\n")
    findings = check_artifacts(records, out).findings
    codes = {(f.stage, f.code) for f in findings}
    assert ("optimizer", "simplex-violation") in codes
    assert ("optimizer", "digest-mismatch") in codes
    assert any("1.2" in f.message for f in findings if f.code == "simplex-violation")


def test_check_missing_payload_and_garbage(run_a, tmp_path):
    out = copy_run(run_a[1], tmp_path / "run")
    records = read_manifest(out)
    (out / records[3].payload_path).unlink()
    (out / records[2].payload_path).write_text("not a split\n")
    findings = check_artifacts(records, out).findings
    codes = {(f.stage, f.code) for f in findings}
    assert ("baseline_metrics", "missing-payload") in codes
    assert ("splitter", "schema") in codes


def test_check_split_size_mismatch(run_a, tmp_path):
    out = copy_run(run_a[1], tmp_path / "run")
    records = read_manifest(out)
    path = out / records[2].payload_path
    path.write_text(path.read_text().replace("test_rows=", "test_rows=1"))
    assert any(f.code == "split-size" for f in check_artifacts(records, out).findings)


def test_check_foreign_numeral_in_report(run_a, tmp_path):
    out = copy_run(run_a[1], tmp_path / "run")
    records = read_manifest(out)
    path = out / records[-1].payload_path
    path.write_text(path.read_text() + "   Extra: 123.4567\n")
    findings = check_artifacts(records, out).findings
    assert any(f.code == "report-numeral" and "123.4567" in f.message for f in findings)


def test_check_dangling_input(run_a, tmp_path):
    out = copy_run(run_a[1], tmp_path / "run")
    records = read_manifest(out)
    records[1].input_digests = ["0" * 64]
    assert any(f.code == "dangling-input" for f in check_artifacts(records, out).findings)


# -- verdict rules --------------------------------------------------------------------------

def test_verdict_optimized_superior():
    rep = build_final_report("A", {"train": report(0.53), "test": report(0.4)},
                             {"train": report(0.83), "test": report(0.6)})
    assert rep.optimized_superior is True
    assert "optimized weights portfolio is superior" in rep.text
    assert "0.8300 vs 0.5300" in rep.text


def test_verdict_not_superior_on_equal_sharpe():
    rep = build_final_report("A", {"train": report(0.5), "test": report(0.5)},
                             {"train": report(0.5), "test": report(0.5)})
    assert rep.optimized_superior is False
    assert rep.recommend_optimized is False


def test_no_degradation_when_test_equals_train():
    rep = build_final_report("B", {"train": report(0.5), "test": report(0.5)},
                             {"train": report(0.9), "test": report(0.9)})
    assert rep.degradation["sharpe_ratio"] is False


def test_drawdown_degradation_flag():
    assert is_degraded(-0.15, -0.18, +1, 0.10) is True
    assert is_degraded(-0.15, -0.16, +1, 0.10) is False
    rep = build_final_report("A", {"train": report(), "test": report()},
                             {"train": report(max_drawdown=-0.15), "test": report(max_drawdown=-0.18)})
    assert rep.degradation["max_drawdown"] is True
    assert "Max Drawdown: degraded, from -0.1500 to -0.1800" in rep.text


def test_volatility_degradation_direction():
    assert is_degraded(0.20, 0.25, -1, 0.10) is True
    assert is_degraded(0.20, 0.15, -1, 0.10) is False
    assert is_degraded(None, 0.15, -1, 0.10) is None


def test_undefined_sharpe_renders_dashes():
    rep = build_final_report("A", {"train": report(None), "test": report(None)},
                             {"train": report(None), "test": report(None)})
    assert rep.optimized_superior is None
    assert "Undetermined" in rep.text
    assert "--" in rep.text


def test_report_numerals_skip_enumerators():
    text = "1. Heading\n   Value: 0.1234 and -2.5000\n2. Next 3\n"
    assert report_numerals(text) == ["0.1234", "-2.5000", "3"]
    assert np.all([t != "1" for t in report_numerals(text)])
