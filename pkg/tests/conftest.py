from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from rollfolio.datasets import make_prices
from rollfolio.market_data import write_prices


def frame(values, columns=None, start="2023-01-01"):
    """Date-indexed float frame from a nested list or 2-D array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    columns = columns or [f"X{i}" for i in range(arr.shape[1])]
    index = pd.date_range(start, periods=arr.shape[0], freq="D", name="date")
    return pd.DataFrame(arr, index=index, columns=columns)


def series(values, start="2023-01-01"):
    index = pd.date_range(start, periods=len(values), freq="D", name="date")
    return pd.Series(np.asarray(values, dtype=np.float64), index=index)


@pytest.fixture(scope="session")
def prices_1667():
    return make_prices(n_rows=1667, seed=7)


@pytest.fixture(scope="session")
def dataset_1667(tmp_path_factory, prices_1667):
    path = tmp_path_factory.mktemp("data") / "prices.csv"
    write_prices(prices_1667, path)
    return path


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("small") / "prices.csv"
    write_prices(make_prices(n_rows=160, tickers=["AAA", "BBB", "CCC", "DDD"], seed=3), path)
    return path


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
