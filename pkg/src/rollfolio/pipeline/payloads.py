"""Text formats of the per-stage payloads."""

from __future__ import annotations

from rollfolio.exceptions import DataError
from rollfolio.metrics import MetricsReport

SPLIT_KEYS = ("ratio", "n_rows", "train_rows", "test_rows",
              "train_start", "train_end", "test_start", "test_end")


def dump_kv(pairs) -> str:
    return "".join(f"{k}={v}\n" for k, v in pairs)


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"malformed key-value line: {line!r}")
        out[key.strip()] = value.strip()
    return out


def dump_metrics_sections(reports: dict[str, MetricsReport]) -> str:
    """``[section]`` headers each followed by a full-precision metrics block."""
    return "\n".join(f"[{name}]\n{report.to_kv()}" for name, report in reports.items())


def parse_metrics_sections(text: str) -> dict[str, MetricsReport]:
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1]
            sections[current] = []
        elif stripped:
            if current is None:
                raise DataError("metrics payload has values before the first section")
            sections[current].append(stripped)
    if not sections:
        raise DataError("metrics payload has no sections")
    return {name: MetricsReport.from_kv("\n".join(lines)) for name, lines in sections.items()}


def parse_split(text: str) -> dict:
    raw = parse_kv(text)
    missing = [k for k in SPLIT_KEYS if k not in raw]
    if missing:
        raise DataError(f"split payload missing keys: {', '.join(missing)}")
    out = dict(raw)
    out["ratio"] = float(raw["ratio"])
    for key in ("n_rows", "train_rows", "test_rows"):
        out[key] = int(raw[key])
    return out
