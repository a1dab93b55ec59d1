"""Discrete-event simulation of the decode-to-encode face pipeline."""

from .core import (
    BATCH_MARGINAL_FRAC,
    RESOURCE_INDEX,
    RESOURCE_ORDER,
    SIM_STAGES,
    SM_UTILIZATION_BASELINE,
    MuxState,
    StageTables,
    analytic_throughput,
    batching_factor,
    build_stage_tables,
    cache_contention,
    decoder_latency,
    measure_power,
    recognize_cost,
    run_kernel,
    simulate,
    streammux_next,
)
from .kernel import KERNEL_ENV_VAR, get_kernel, numba_enabled
from .report import (
    FRAMES_CSV_HEADER,
    FrameRecord,
    SimReport,
    frames_csv_text,
    summary_dict,
    summary_json_text,
    write_frames_csv,
    write_summary_json,
)
from .scenario import (
    PACING_MODES,
    PACING_REALTIME,
    PACING_SATURATED,
    Scenario,
    ScenarioConfig,
    SourceSpec,
    build_scenario,
    decode_order,
    load_scenario,
    parse_scenario,
    validate_scenario,
)

__all__ = [
    "BATCH_MARGINAL_FRAC",
    "FRAMES_CSV_HEADER",
    "FrameRecord",
    "KERNEL_ENV_VAR",
    "MuxState",
    "PACING_MODES",
    "PACING_REALTIME",
    "PACING_SATURATED",
    "RESOURCE_INDEX",
    "RESOURCE_ORDER",
    "SIM_STAGES",
    "SM_UTILIZATION_BASELINE",
    "Scenario",
    "ScenarioConfig",
    "SimReport",
    "SourceSpec",
    "StageTables",
    "analytic_throughput",
    "batching_factor",
    "build_scenario",
    "build_stage_tables",
    "cache_contention",
    "decode_order",
    "decoder_latency",
    "frames_csv_text",
    "get_kernel",
    "load_scenario",
    "measure_power",
    "numba_enabled",
    "parse_scenario",
    "recognize_cost",
    "run_kernel",
    "simulate",
    "streammux_next",
    "summary_dict",
    "summary_json_text",
    "validate_scenario",
    "write_frames_csv",
    "write_summary_json",
]
