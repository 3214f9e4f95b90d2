"""Staged, auditable crew runs: artifacts, checker and final report."""

from rollfolio.pipeline.artifacts import StageArtifact, read_manifest
from rollfolio.pipeline.checker import CheckResult, Finding, check_artifacts
from rollfolio.pipeline.crew import STAGES, CrewPlan, RunResult, run_crew
from rollfolio.pipeline.report import FinalReport, render_final_report

__all__ = [
    "STAGES",
    "CheckResult",
    "CrewPlan",
    "FinalReport",
    "Finding",
    "RunResult",
    "StageArtifact",
    "check_artifacts",
    "read_manifest",
    "render_final_report",
    "run_crew",
]
