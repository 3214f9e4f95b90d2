"""Weight vectors and rolling weight schedules, with delimited-text I/O.

The text format has one row per ``(start_date, end_date, ticker, weight)``.
A static weight vector is written as a one-entry schedule.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from rollfolio.exceptions import DataError
from rollfolio.utils.validation import check_weights, format_date as _fmt

__all__ = ["ScheduleEntry", "WeightSchedule", "equal_weights"]

HEADER = ["start_date", "end_date", "ticker", "weight"]


def equal_weights(assets) -> pd.Series:
    """The 1/N portfolio over ``assets``."""
    assets = list(assets)
    if not assets:
        raise DataError("equal_weights needs at least one asset")
    w = np.full(len(assets), 1.0 / len(assets))
    return pd.Series(w / w.sum(), index=assets, name="weight")


@dataclass
class ScheduleEntry:
    """Weights applied to every row dated within ``[start, end]`` inclusive.

    ``kind`` is one of ``warmup``, ``optimized`` or ``fallback``; ``window``
    holds the first and last date of the estimation window, if any.  Neither
    takes part in equality.
    """

    start: pd.Timestamp
    end: pd.Timestamp
    weights: pd.Series
    kind: str = field(default="optimized", compare=False)
    window: tuple | None = field(default=None, compare=False)

    def __eq__(self, other):
        if not isinstance(other, ScheduleEntry):
            return NotImplemented
        return (
            self.start == other.start
            and self.end == other.end
            and list(self.weights.index) == list(other.weights.index)
            and np.array_equal(self.weights.to_numpy(), other.weights.to_numpy())
        )


@dataclass
class WeightSchedule:
    entries: list[ScheduleEntry]
    window_length: int | None = None
    holding_period: int | None = None

    def __post_init__(self):
        for prev, cur in zip(self.entries, self.entries[1:]):
            if not prev.end < cur.start:
                raise DataError(
                    f"schedule entries overlap or are unordered at {_fmt(cur.start)}"
                )
        for e in self.entries:
            if e.start > e.end:
                raise DataError(f"schedule entry starts after it ends at {_fmt(e.start)}")
            check_weights(e.weights)

    @classmethod
    def constant(cls, weights: pd.Series, start, end) -> "WeightSchedule":
        return cls([ScheduleEntry(start, end, weights, kind="static")])

    @property
    def assets(self) -> list:
        return list(self.entries[0].weights.index) if self.entries else []

    @property
    def final_weights(self) -> pd.Series:
        return self.entries[-1].weights

    def restrict(self, start, end) -> "WeightSchedule":
        """Clip every entry to ``[start, end]`` and drop the empty ones."""
        clipped = []
        for e in self.entries:
            lo, hi = max(e.start, start), min(e.end, end)
            if lo <= hi:
                clipped.append(ScheduleEntry(lo, hi, e.weights, e.kind, e.window))
        return WeightSchedule(clipped, self.window_length, self.holding_period)

    def weight_frame(self) -> pd.DataFrame:
        """Entries as a frame indexed by start date, one column per ticker."""
        return pd.DataFrame(
            [e.weights.to_numpy() for e in self.entries],
            index=pd.Index([e.start for e in self.entries], name="start_date"),
            columns=self.assets,
        )

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        if self.window_length is not None:
            buf.write(f"# window={self.window_length}\n")
        if self.holding_period is not None:
            buf.write(f"# holding={self.holding_period}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(HEADER)
        for e in self.entries:
            for ticker, w in e.weights.items():
                writer.writerow([_fmt(e.start), _fmt(e.end), ticker, repr(float(w))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source, *, validate: bool = True) -> "WeightSchedule":
        """Parse the delimited format; ``source`` is a path or the text itself."""
        text = _read_text(source)
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key.strip()] = int(value)
            elif line.strip():
                body.append(line)
        rows = list(csv.reader(body))
        if not rows or rows[0] != HEADER:
            raise DataError(f"weight file must start with header {','.join(HEADER)}")
        grouped: dict[tuple, list] = {}
        for row in rows[1:]:
            if len(row) != 4:
                raise DataError(f"malformed weight row: {row}")
            grouped.setdefault((row[0], row[1]), []).append((row[2], float(row[3])))
        entries = []
        for (start, end), pairs in grouped.items():
            weights = pd.Series([w for _, w in pairs], index=[t for t, _ in pairs], name="weight")
            entries.append(ScheduleEntry(_parse_date(start), _parse_date(end), weights))
        if validate:
            return cls(entries, meta.get("window"), meta.get("holding"))
        obj = cls.__new__(cls)
        obj.entries, obj.window_length, obj.holding_period = entries, meta.get("window"), meta.get("holding")
        return obj


def _read_text(source) -> str:
    if isinstance(source, str) and "\n" in source:
        return source
    with open(source, newline="") as fh:
        return fh.read()


def _parse_date(s: str):
    try:
        return int(s)
    except ValueError:
        return pd.Timestamp(s)
