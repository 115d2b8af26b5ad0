"""Procedural labeled-scene generation for articulated objects and tools."""

from .catalog import (
    ARTICULATED_CATEGORIES,
    ARTICULATED_UNSEEN,
    TOOL_CATEGORIES,
    TOOL_UNSEEN,
    ToolModel,
    build_articulated,
    build_tool,
)
from .config import SPLITS, GenConfig, InsufficientObjects, largest_remainder, planned_counts
from .generate import (
    EmptyProjection,
    PlannedObject,
    generate_articulated,
    generate_corpus,
    generate_tools,
    model_for_object_id,
    plan_objects,
    split_dataset,
    split_objects,
)
from .labels import (
    GraspCandidates,
    GraspRegion,
    GraspRegionChoice,
    describe_part,
    edge_weight,
    match_description,
    sample_grasp_affordance,
)

__all__ = [
    "ARTICULATED_CATEGORIES",
    "ARTICULATED_UNSEEN",
    "EmptyProjection",
    "GenConfig",
    "GraspCandidates",
    "GraspRegion",
    "GraspRegionChoice",
    "InsufficientObjects",
    "PlannedObject",
    "SPLITS",
    "TOOL_CATEGORIES",
    "TOOL_UNSEEN",
    "ToolModel",
    "build_articulated",
    "build_tool",
    "describe_part",
    "edge_weight",
    "generate_articulated",
    "generate_corpus",
    "generate_tools",
    "largest_remainder",
    "match_description",
    "model_for_object_id",
    "plan_objects",
    "planned_counts",
    "sample_grasp_affordance",
    "split_dataset",
    "split_objects",
]
