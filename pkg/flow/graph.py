"""
LangGraph workflow definition.

The selected stages form a directed acyclic graph rooted at ingest. Stages that depend
only on ingest run in the same step, concurrently; a final report node waits for every
leaf, writes the tables and assembles the run manifest on a single thread.
"""

import operator
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, TypedDict

import logfire
from langgraph.constants import END
from langgraph.graph import StateGraph

from econometrics.errors import ReportIoError
from models.config import PipelineConfig, RunManifest, StageName, StageRecord, StageStatus
from models.schema import Series
from models.volatility import PosteriorDraws
from stages import STAGES
from utils.logging import log_stage_error, log_workflow_event
from utils.reports import Table, emit_report, file_sha256

REPORT_NODE = "report"


def _node(stage_name: str) -> str:
    # Graph node ids must not collide with PipelineState keys (e.g. "volatility").
    return f"{stage_name}_stage"


def _merge(left: Dict[str, Any], right: Dict[str, Any]) -> Dict[str, Any]:
    return {**(left or {}), **(right or {})}


class PipelineState(TypedDict, total=False):
    """Type definition for the state passed between graph nodes."""

    series: Dict[str, Series]
    volatility: Annotated[Dict[str, Series], _merge]
    fits: Annotated[Dict[str, PosteriorDraws], _merge]
    results: Annotated[Dict[str, Any], _merge]
    tables: Annotated[List[Table], operator.add]
    records: Annotated[Dict[str, StageRecord], _merge]
    manifest: RunManifest


def _leaves(config: PipelineConfig) -> List[str]:
    upstream = {d for s in config.stages for d in config.dependencies(s)}
    return [_node(s.value) for s in config.stages if s not in upstream]


def write_outputs(config: PipelineConfig, state: Dict[str, Any]) -> Dict[str, Any]:
    """Emit every stage's tables in stage order and write the manifest."""
    out = Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    by_name = {t.name: t for t in state.get("tables", [])}
    records: Dict[str, StageRecord] = dict(state.get("records", {}))

    for stage in config.stages:
        record = records.get(stage.value)
        if record is None or record.status != StageStatus.SUCCEEDED:
            continue
        tables = [by_name[n] for n in record.tables if n in by_name]
        try:
            written = emit_report(tables, out, config.output.formats)
        except ReportIoError as e:
            log_stage_error(stage.value, e, {"phase": "report"})
            records[stage.value] = record.model_copy(
                update={"status": StageStatus.FAILED, "error_type": type(e).__name__, "error_message": str(e)}
            )
            continue
        records[stage.value] = record.model_copy(
            update={
                "tables": [t.name for t in tables if not t.is_empty],
                "files": [*record.files, *(p.relative_to(out).as_posix() for p in written)],
            }
        )

    hashes = {f: file_sha256(out / f) for r in records.values() for f in r.files}
    manifest = RunManifest(
        config_hash=config.config_hash(),
        seed=config.seed,
        stages={s.value: records[s.value] for s in config.stages if s.value in records},
        file_hashes=dict(sorted(hashes.items())),
    )
    manifest.write(out)
    logfire.info(
        "Manifest written",
        path=str(out / "manifest.json"),
        tables=len(manifest.tables),
        failed=manifest.failed,
    )
    return {"manifest": manifest}


def create_pipeline_graph(config: PipelineConfig):
    """
    Create a LangGraph workflow running the stages selected in ``config``.

    Args:
        config: Validated pipeline configuration.

    Returns:
        A compiled LangGraph workflow instance.
    """
    workflow = StateGraph(PipelineState)

    # Define tracing wrappers for each stage
    def trace_node(node_name: str, stage_func: Callable[[Dict[str, Any]], Dict[str, Any]]):
        def traced_func(state: Dict[str, Any]) -> Dict[str, Any]:
            log_workflow_event(event_name=f"{node_name}_start", state=state, additional_data={"node": node_name})

            result = stage_func(state)

            log_workflow_event(event_name=f"{node_name}_complete", state=result, additional_data={"node": node_name})
            return result

        return traced_func

    for stage in config.stages:
        workflow.add_node(_node(stage.value), trace_node(stage.value, STAGES[stage](config).run))
    workflow.add_node(REPORT_NODE, trace_node(REPORT_NODE, lambda state: write_outputs(config, state)))

    for stage in config.stages:
        if stage == StageName.INGEST:
            continue
        upstream = [_node(d.value) for d in config.dependencies(stage)]
        workflow.add_edge(upstream if len(upstream) > 1 else upstream[0], _node(stage.value))
    leaves = _leaves(config)
    workflow.add_edge(leaves if len(leaves) > 1 else leaves[0], REPORT_NODE)
    workflow.add_edge(REPORT_NODE, END)

    workflow.set_entry_point(_node(StageName.INGEST.value))

    return workflow.compile()


def run_pipeline(config: PipelineConfig) -> RunManifest:
    """Run every selected stage and return the manifest of what was written."""
    workflow = create_pipeline_graph(config)
    initial_state: PipelineState = {"records": {}, "tables": [], "results": {}, "volatility": {}, "fits": {}}
    log_workflow_event(
        event_name="workflow_start",
        state=initial_state,
        additional_data={"stages": [s.value for s in config.stages], "seed": config.seed},
    )
    final_state = workflow.invoke(initial_state)
    manifest: RunManifest = final_state["manifest"]
    log_workflow_event(
        event_name="workflow_complete",
        state=final_state,
        additional_data={"status": "failed" if manifest.failed else "success", "failed": manifest.failed},
    )
    return manifest
