"""Stage artifacts and the run manifest.

A run directory holds one payload file per stage, optional sidecar files,
and ``manifest.jsonl`` with one JSON record per artifact.  Digests cover
payload bytes only, so timestamps never affect them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

DIGEST_ALGORITHM = "sha256"
MANIFEST_NAME = "manifest.jsonl"
FAILURE_NAME = "failure.json"


def digest_bytes(data: bytes) -> str:
    return hashlib.new(DIGEST_ALGORITHM, data).hexdigest()


def digest_file(path) -> str | None:
    try:
        return digest_bytes(Path(path).read_bytes())
    except FileNotFoundError:
        return None


@dataclass
class StageArtifact:
    """Persisted, checksummed output of one stage.

    ``payload_path`` and sidecar paths are relative to the run directory.
    ``params_digest`` fingerprints the run configuration and dataset, so a
    resumed run only reuses artifacts built from the same inputs.
    """

    stage_name: str
    produced_at: str
    input_digests: list[str]
    content_digest: str
    payload_path: str
    schema_tag: str
    params_digest: str = ""
    digest_algorithm: str = DIGEST_ALGORITHM
    sidecars: dict[str, dict[str, str]] = field(default_factory=dict)

    def to_json(self) -> str:
        record = {
            "stage": self.stage_name,
            "schema_tag": self.schema_tag,
            "digest": self.content_digest,
            "path": self.payload_path,
        }
        record.update(
            produced_at=self.produced_at,
            input_digests=self.input_digests,
            params_digest=self.params_digest,
            digest_algorithm=self.digest_algorithm,
            sidecars=self.sidecars,
        )
        return json.dumps(record, sort_keys=False)

    @classmethod
    def from_json(cls, line: str) -> "StageArtifact":
        rec = json.loads(line)
        return cls(
            stage_name=rec["stage"],
            produced_at=rec.get("produced_at", ""),
            input_digests=list(rec.get("input_digests", [])),
            content_digest=rec["digest"],
            payload_path=rec["path"],
            schema_tag=rec["schema_tag"],
            params_digest=rec.get("params_digest", ""),
            digest_algorithm=rec.get("digest_algorithm", DIGEST_ALGORITHM),
            sidecars=rec.get("sidecars", {}),
        )

    def as_dict(self) -> dict:
        return asdict(self)


def write_manifest(run_dir, records: list[StageArtifact]) -> Path:
    path = Path(run_dir) / MANIFEST_NAME
    tmp = path.with_suffix(".tmp")
    tmp.write_text("".join(r.to_json() + "\n" for r in records))
    tmp.replace(path)
    return path


def read_manifest(run_dir) -> list[StageArtifact]:
    """Parse ``manifest.jsonl``; raises FileNotFoundError if absent."""
    path = Path(run_dir) / MANIFEST_NAME
    lines = path.read_text().splitlines()
    return [StageArtifact.from_json(line) for line in lines if line.strip()]


def artifact_by_stage(records: list[StageArtifact]) -> dict[str, StageArtifact]:
    return {r.stage_name: r for r in records}
