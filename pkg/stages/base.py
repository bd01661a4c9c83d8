"""
Common machinery for pipeline stages.

A stage reads the shared workflow state, runs one battery of the toolkit and returns a
partial state update. ``run`` is the LangGraph node: it times the work, logs it, turns
exceptions into a FAILED record and skips the stage when an upstream stage did not
succeed.
"""

import time
from pathlib import Path
from typing import Any, ClassVar, Dict, List

import logfire
from pydantic import BaseModel, ConfigDict, Field

from econometrics.errors import StageFailure
from models.config import PipelineConfig, StageName, StageRecord, StageStatus, stage_seed
from models.schema import Series
from utils.logging import StageContext, log_stage_completion, log_stage_error, log_stage_start
from utils.reports import Table


class StageOutput(BaseModel):
    """What a stage hands back to the workflow."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    tables: List[Table] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list, description="Paths relative to the output directory")
    warnings: List[str] = Field(default_factory=list)
    results: Any = None
    updates: Dict[str, Any] = Field(default_factory=dict, description="Extra state keys to merge")


class Stage:
    """Base class for pipeline stages."""

    name: ClassVar[StageName]

    def __init__(self, config: PipelineConfig) -> None:
        self.config = config

    @property
    def seed(self) -> int:
        return stage_seed(self.config.seed, self.name.value)

    def stream_seed(self, *parts: str) -> int:
        """Seed for one unit of work inside the stage, keyed by name rather than position."""
        return stage_seed(self.seed, ":".join(parts))

    @property
    def output_dir(self) -> Path:
        return self.config.output.directory

    def series(self, state: Dict[str, Any], name: str) -> Series:
        return state["series"][name]

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        raise NotImplementedError

    def _record(self, status: StageStatus, **fields: Any) -> Dict[str, Any]:
        record = StageRecord(stage=self.name, status=status, seed=self.seed, **fields)
        return {"records": {self.name.value: record}}

    def run(self, state: Dict[str, Any]) -> Dict[str, Any]:
        """
        LangGraph node for this stage.

        Args:
            state: Current workflow state.

        Returns:
            Partial state update with this stage's record, tables and results.
        """
        stage = self.name.value
        records: Dict[str, StageRecord] = state.get("records", {})
        blocked = [
            d.value
            for d in self.config.dependencies(self.name)
            if d.value not in records or records[d.value].status != StageStatus.SUCCEEDED
        ]
        if blocked:
            logfire.warn("Stage skipped, upstream did not succeed", stage=stage, upstream=blocked)
            return self._record(StageStatus.SKIPPED, warnings=[f"upstream did not succeed: {blocked}"])

        ctx = StageContext(stage=stage, seed=self.seed, pairs=len(self.config.battery.pairs))
        log_stage_start(stage, ctx.model_dump())
        start_time = time.time()
        try:
            with logfire.span("stage {stage}", stage=stage):
                output = self.execute(state)
        except Exception as e:
            elapsed_time_ms = (time.time() - start_time) * 1000
            log_stage_error(stage, e, ctx.model_dump())
            failure = StageFailure(stage, e)
            return self._record(
                StageStatus.FAILED,
                wall_time_ms=elapsed_time_ms,
                error_type=type(e).__name__,
                error_message=str(failure),
            )

        elapsed_time_ms = (time.time() - start_time) * 1000
        tables = [t.name for t in output.tables]
        log_stage_completion(
            stage,
            {"tables": tables, "files": len(output.files), "warnings": output.warnings},
            elapsed_time_ms=elapsed_time_ms,
        )
        update = self._record(
            StageStatus.SUCCEEDED,
            wall_time_ms=elapsed_time_ms,
            tables=tables,
            files=output.files,
            warnings=output.warnings,
        )
        update["tables"] = output.tables
        if output.results is not None:
            update["results"] = {stage: output.results}
        update.update(output.updates)
        return update
