"""Flow module initialization."""

from flow.graph import PipelineState, create_pipeline_graph, run_pipeline

__all__ = ["create_pipeline_graph", "run_pipeline", "PipelineState"]
