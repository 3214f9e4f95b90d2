from __future__ import annotations

import argparse

import numpy as np
import pandas as pd
import pytest

from rollfolio.backtest import read_backtest
from rollfolio.cli import CliConfig, UsageError, main, resolve_config
from rollfolio.datasets import make_prices
from rollfolio.market_data import write_prices
from rollfolio.pipeline import read_manifest


@pytest.fixture(scope="module")
def runs(tmp_path_factory, small_dataset):
    base = tmp_path_factory.mktemp("cli")
    assert main(["run", "a", "--data", str(small_dataset), "--out", str(base / "A")]) == 0
    assert main(["run", "b", "--data", str(small_dataset), "--out", str(base / "B")]) == 0
    return base / "A", base / "B"


def kv_lines(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def test_run_prints_report(small_dataset, tmp_path, capsys):
    assert main(["run", "a", "--data", str(small_dataset), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("REPORT CREW A") and "5. Recommendation" in out
    assert len(read_manifest(tmp_path)) == 8


def test_run_missing_data_is_usage_error(tmp_path, capsys):
    assert main(["run", "a", "--out", str(tmp_path)]) == 2
    assert "--data" in capsys.readouterr().err
    assert main(["run", "a", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2


def test_run_b_short_panel_names_stage(tmp_path, capsys):
    data = tmp_path / "short.csv"
    write_prices(make_prices(n_rows=20, tickers=["A", "B"], seed=1), data)
    assert main(["run", "b", "--data", str(data), "--out", str(tmp_path / "r")]) == 1
    assert "optimizer" in capsys.readouterr().err


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["run", "c"])
    assert info.value.code == 2


def test_same_seed_same_stdout(small_dataset, tmp_path, capsys):
    args = ["run", "b", "--data", str(small_dataset), "--seed", "3"]
    main(args + ["--out", str(tmp_path / "x")])
    first = capsys.readouterr().out
    main(args + ["--out", str(tmp_path / "y")])
    assert capsys.readouterr().out == first


def test_check_exit_codes(runs, tmp_path, capsys):
    run_a, _ = runs
    assert main(["check", str(run_a)]) == 0
    assert capsys.readouterr().out == "status=pass\n"
    assert main(["check", str(tmp_path)]) == 2

    tampered = tmp_path / "t"
    tampered.mkdir()
    for p in run_a.iterdir():
        (tampered / p.name).write_bytes(p.read_bytes())
    payload = tampered / read_manifest(tampered)[4].payload_path
    payload.write_text(payload.read_text().replace("0.", "0.9", 1))
    assert main(["check", str(tampered)]) == 1
    out = capsys.readouterr().out
    assert "status=fail" in out and "digest-mismatch" in out and "optimizer" in out


def test_compare_table(runs, capsys):
    assert main(["compare", *map(str, runs)]) == 0
    out = capsys.readouterr().out
    for section in ("[train]", "[test]"):
        block = out.split(section)[1].split("\n\n")[0].splitlines()
        assert block[1].split()[:3] == ["Metric", "Equal", "Weights"]
        assert len(block) == 1 + 1 + 7 + 1
    assert "dominance:" in out


def test_compare_identical_runs_tie(runs, capsys):
    run_a, _ = runs
    assert main(["compare", str(run_a), str(run_a)]) == 0
    assert "dominance: tie" in capsys.readouterr().out


def test_compare_refuses_tampered(runs, tmp_path, capsys):
    run_a, run_b = runs
    bad = tmp_path / "bad"
    bad.mkdir()
    for p in run_b.iterdir():
        (bad / p.name).write_bytes(p.read_bytes())
    (bad / read_manifest(bad)[0].payload_path).write_text("date,A\n")
    assert main(["compare", str(run_a), str(bad)]) == 1
    assert "check failed" in capsys.readouterr().err


def write_benchmark(path, index, values):
    write_prices(pd.DataFrame({"SPX": values}, index=pd.DatetimeIndex(index, name="date")), path)


def test_benchmark_identical_equity(runs, tmp_path, capsys):
    run_a, _ = runs
    rec = read_manifest(run_a)[5]
    _, equity = read_backtest(run_a / rec.sidecars["backtest_test"]["path"])
    index = equity.index.insert(0, equity.index[0] - pd.Timedelta(days=1))
    write_benchmark(tmp_path / "b.csv", index, np.concatenate([[1.0], equity.to_numpy()]))
    assert main(["benchmark", str(run_a), "--benchmark", str(tmp_path / "b.csv")]) == 0
    kv = kv_lines(capsys.readouterr().out)
    assert abs(float(kv["excess_return"])) < 1e-4 and float(kv["tracking_error"]) < 1e-4
    assert int(kv["common_days"]) == len(equity)


def test_benchmark_constant_zero_return(runs, tmp_path, capsys):
    run_a, _ = runs
    rec = read_manifest(run_a)[5]
    portfolio, _ = read_backtest(run_a / rec.sidecars["backtest_test"]["path"])
    index = portfolio.index.insert(0, portfolio.index[0] - pd.Timedelta(days=1))
    write_benchmark(tmp_path / "flat.csv", index, np.full(len(index), 100.0))
    assert main(["benchmark", str(run_a), "--benchmark", str(tmp_path / "flat.csv")]) == 0
    out = capsys.readouterr().out
    kv = kv_lines(out)
    expected = float(portfolio.mean() * 252)
    assert kv["excess_return"] == f"{expected:.4f}"
    assert out.splitlines()[1].split()[1] == f"{expected:.4f}"


def test_benchmark_disjoint_dates(runs, tmp_path, capsys):
    run_a, _ = runs
    write_benchmark(tmp_path / "old.csv", pd.date_range("1990-01-01", periods=5), [1.0, 2, 3, 4, 5])
    assert main(["benchmark", str(run_a), "--benchmark", str(tmp_path / "old.csv")]) == 1
    assert "cannot compare" in capsys.readouterr().err


def test_tools(small_dataset, tmp_path, capsys):
    assert main(["tools", "split", "--data", str(small_dataset), "--ratio", "0.5"]) == 0
    assert capsys.readouterr().out == "train_rows=80\ntest_rows=80\n"

    assert main(["tools", "optimize", "--data", str(small_dataset), "--rolling",
                 "--out", str(tmp_path / "w.csv")]) == 0
    assert (tmp_path / "w.csv").read_text().startswith("# window=30")

    assert main(["tools", "metrics", "--data", str(small_dataset),
                 "--weights", str(tmp_path / "w.csv")]) == 0
    kv = kv_lines(capsys.readouterr().out)
    assert set(kv) >= {"expected_return", "sharpe_ratio", "liquidity_risk"}

    assert main(["tools", "metrics", "--data", str(small_dataset)]) == 0
    assert kv_lines(capsys.readouterr().out)["liquidity_risk"] == "Moderate"  # HHI 0.25


# -- configuration precedence ---------------------------------------------------------

def namespace(**kw):
    return argparse.Namespace(**{"config": None, **kw})


def test_defaults():
    assert resolve_config(namespace(), environ={}) == CliConfig()


def test_flag_over_env_over_file(tmp_path):
    cfg_file = tmp_path / "settings.cfg"
    cfg_file.write_text("# comment\nwindow = 20\nholding = 10\nseed = 4\nrisk-free-rate = 0.01\n")
    env = {"ROLLFOLIO_HOLDING": "12", "ROLLFOLIO_SEED": "5"}
    cfg = resolve_config(namespace(config=str(cfg_file), seed=9), environ=env)
    assert (cfg.window, cfg.holding, cfg.seed, cfg.risk_free_rate) == (20, 12, 9, 0.01)


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    with pytest.raises(UsageError, match="colour"):
        resolve_config(namespace(config=str(bad)), environ={})
    with pytest.raises(UsageError, match="window"):
        resolve_config(namespace(), environ={"ROLLFOLIO_WINDOW": "thirty"})


def test_config_file_drives_run(small_dataset, tmp_path, capsys):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text(f"data = {small_dataset}\nout = {tmp_path / 'run'}\nwindow = 20\n")
    assert main(["--config", str(cfg_file), "run", "b"]) == 0
    schedule = (tmp_path / "run" / read_manifest(tmp_path / "run")[4].payload_path).read_text()
    assert schedule.startswith("# window=20")
