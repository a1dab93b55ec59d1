"""Calibrated simulator and allocator for face detect/recognize pipelines
on a heterogeneous edge SoC (GPU SMs, dual DLAs, PVA, NVDEC/NVENC).

The package covers the full loop: CNN graph description, per-engine cost
and power modeling, layer/model placement with transfer accounting, and a
discrete-event pipeline simulator with bounded queues and a reorder-aware
decoder model. `hetpipe.cli` is the command-line entry point.
"""
from .errors import (
    CalibrationError,
    CapabilityError,
    ConfigError,
    GraphParseError,
    HetpipeError,
    ValidationError,
)
from .model_graph import (
    LayerKind,
    LayerNode,
    ModelGraph,
    Precision,
    build_facedetect,
    build_facenet,
    load_graph,
    parse_graph,
    toposort,
)
from .engine_model import (
    CostParams,
    Engine,
    EngineCatalog,
    EngineClass,
    calibrate,
    default_measurements,
    default_orin_catalog,
    layer_cost,
    load_measurements,
    model_cost,
    power_draw,
    solve_balance,
)
from .allocator import (
    AllocationPlan,
    PLAN_SCHEMES,
    SCHEMES,
    TransferEvent,
    default_pipeline_plan,
    emulate_lowering,
    island_events,
    plan_layer_balanced,
    plan_layer_level,
    plan_model_level,
    precision_fallback,
    serialize_plan,
)
from .pipeline_sim import (
    Scenario,
    ScenarioConfig,
    SimReport,
    SourceSpec,
    analytic_throughput,
    build_scenario,
    load_scenario,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "AllocationPlan",
    "CalibrationError",
    "CapabilityError",
    "ConfigError",
    "CostParams",
    "Engine",
    "EngineCatalog",
    "EngineClass",
    "GraphParseError",
    "HetpipeError",
    "LayerKind",
    "LayerNode",
    "ModelGraph",
    "PLAN_SCHEMES",
    "Precision",
    "SCHEMES",
    "Scenario",
    "ScenarioConfig",
    "SimReport",
    "SourceSpec",
    "TransferEvent",
    "ValidationError",
    "analytic_throughput",
    "build_facedetect",
    "build_facenet",
    "build_scenario",
    "calibrate",
    "default_measurements",
    "default_orin_catalog",
    "default_pipeline_plan",
    "emulate_lowering",
    "island_events",
    "layer_cost",
    "load_graph",
    "load_measurements",
    "load_scenario",
    "model_cost",
    "parse_graph",
    "plan_layer_balanced",
    "plan_layer_level",
    "plan_model_level",
    "power_draw",
    "precision_fallback",
    "serialize_plan",
    "simulate",
    "solve_balance",
    "toposort",
    "__version__",
]
