"""
Logging utilities with logfire integration for structured tracing of pipeline runs.

Each stage logs its start, completion and failures through these helpers so a run can be
followed event by event, locally or in the logfire UI when a token is configured.
"""

import os
from typing import Any, Dict, Optional

import logfire
from pydantic import BaseModel, Field


def initialize_logfire(service_name: str = "commodity-causality") -> None:
    """
    Initialize logfire for structured logging and tracing.

    Events are sent to logfire only when LOGFIRE_TOKEN is set in the environment (or in a
    .env file loaded beforehand); otherwise they stay local.
    """
    try:
        logfire.configure(
            service_name=service_name,
            token=os.getenv("LOGFIRE_TOKEN"),
            send_to_logfire="if-token-present",
        )
    except Exception as e:
        # Fallback if logfire cannot be initialized
        print(f"Warning: Failed to initialize logfire: {e}")
        print("Continuing without structured logging capabilities.")


class StageContext(BaseModel):
    """Context information for stage logging."""

    stage: str = Field(description="Pipeline stage name")
    seed: Optional[int] = Field(default=None, description="Seed of the stage's random stream")
    pairs: int = Field(default=0, description="Number of (effect, cause) pairs the stage covers")


def _summarize(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_summarize(v) for v in value[:20]]
    if isinstance(value, dict):
        return {str(k): _summarize(v) for k, v in list(value.items())[:20]}
    return str(value)[:100]


def log_stage_start(stage: str, ctx: Optional[Dict[str, Any]] = None) -> None:
    """
    Log the start of a pipeline stage.

    Args:
        stage: Stage name (e.g., "unit_root", "volatility")
        ctx: Optional additional context information
    """
    event_data = {
        "stage": stage,
        "event": "stage_start",
    }

    if ctx:
        event_data.update(ctx)

    logfire.info("Stage started", **event_data)


def log_stage_completion(
    stage: str,
    result: Any,
    elapsed_time_ms: Optional[float] = None,
    ctx: Optional[Dict[str, Any]] = None,
) -> None:
    """
    Log the completion of a pipeline stage with a summary of what it produced.

    Args:
        stage: Stage name
        result: The stage output, or a summary of it
        elapsed_time_ms: Optional elapsed time in milliseconds
        ctx: Optional additional context information
    """
    event_data = {
        "stage": stage,
        "event": "stage_completion",
        "result": _summarize(result),
    }

    if elapsed_time_ms is not None:
        event_data["elapsed_time_ms"] = elapsed_time_ms

    if ctx:
        event_data.update(ctx)

    logfire.info("Stage completed", **event_data)


def log_stage_error(stage: str, error: Exception, ctx: Optional[Dict[str, Any]] = None) -> None:
    """
    Log an error raised inside a pipeline stage.

    Args:
        stage: Stage name
        error: The exception that occurred
        ctx: Optional additional context information
    """
    event_data = {
        "stage": stage,
        "event": "stage_error",
        "error_type": type(error).__name__,
        "error_message": str(error),
    }

    if ctx:
        event_data.update(ctx)

    logfire.error("Stage error", **event_data)


def log_workflow_event(
    event_name: str,
    state: Dict[str, Any],
    additional_data: Optional[Dict[str, Any]] = None,
) -> None:
    """
    Log a workflow event with a safe summary of the current state.

    Args:
        event_name: Name of the workflow event (e.g., "workflow_start", "ingest_complete")
        state: The current workflow state
        additional_data: Optional additional data to include in the log
    """
    event_data = {
        "event": event_name,
        "state_keys": sorted(state.keys()),
    }

    # Series and fits are large; only their shape goes into the log
    safe_state = {}
    for k, v in state.items():
        if isinstance(v, BaseModel):
            safe_state[k] = f"{v.__class__.__name__} instance"
        elif isinstance(v, dict):
            safe_state[k] = f"{len(v)} entries"
        elif isinstance(v, list):
            safe_state[k] = f"{len(v)} items"
        else:
            str_rep = str(v)
            safe_state[k] = (str_rep[:100] + "...") if len(str_rep) > 100 else str_rep

    event_data["state"] = safe_state

    if additional_data:
        event_data.update(additional_data)

    logfire.info(f"Workflow event: {event_name}", **event_data)
