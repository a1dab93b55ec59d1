"""Simulation front end: stage tables, the simulate() entry point, and the
closed-form throughput oracle.

The kernel is resource-agnostic; everything scheme-specific happens here
when the per-frame latency/interval tables are built. Intervals are the
calibrated initiation-interval fraction of each stage's latency, scaled by
the cache-contention multiplier for SM-resident inference stages and by the
multi-stream batching factor. The streammux is the one exception: its
recorded latency is large but it admits a frame every fixed half
millisecond, so its interval does not track its latency.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ..engine_model import (
    DEFAULT_INTERVAL_SCALE,
    ENGINE_CPU,
    ENGINE_DLA0,
    ENGINE_DLA1,
    ENGINE_NVDEC,
    ENGINE_NVENC,
    ENGINE_PVA,
    ENGINE_SM,
    SCHEMES,
    CostParams,
    power_draw,
    recognize_per_face_s,
    sm_working_set_bytes,
)
from ..errors import CalibrationError, ConfigError, ValidationError
from .kernel import get_kernel
from .scenario import PACING_SATURATED, Scenario, decode_order, validate_scenario

SIM_STAGES = ("decoder", "streammux", "preprocess", "detect", "recognize", "encode")

RESOURCE_ORDER = (
    ENGINE_NVDEC,
    ENGINE_CPU,
    ENGINE_PVA,
    ENGINE_SM,
    ENGINE_DLA0,
    ENGINE_DLA1,
    ENGINE_NVENC,
)
RESOURCE_INDEX = {eng: i for i, eng in enumerate(RESOURCE_ORDER)}

# Marginal cost of each additional concurrent stream on an inference stage:
# per-frame time becomes (1 + (S-1) * frac) / S of the single-stream value.
BATCH_MARGINAL_FRAC = 0.44

# Background SM load (display, context switches) added to the reported
# utilization figure; power accounting uses raw busy time instead.
SM_UTILIZATION_BASELINE = 0.173

_FRAME_TYPE_INDEX = {"I": 0, "P": 1, "B": 2}


def recognize_cost(base_per_face_s: float, overhead_s: float, faces: int) -> float:
    """Seconds to embed all faces in one frame."""
    if faces < 0:
        raise ValueError("face count must be non-negative")
    return overhead_s + faces * base_per_face_s


def decoder_latency(frame_type: str, params: CostParams, scheme: str, rng=None):
    """Decode service seconds for one frame type under a scheme's bases."""
    bases = params.decoder_bases_s.get(scheme)
    if bases is None:
        raise CalibrationError("scheme %s has no decoder calibration" % scheme)
    idx = _FRAME_TYPE_INDEX.get(frame_type)
    if idx is None:
        raise ConfigError("frame type must be one of I, P, B")
    base = bases[idx]
    if rng is None:
        return base
    j = params.jitter_frac
    return base * rng.uniform(1.0 - j, 1.0 + j)


@dataclass
class MuxState:
    """Round-robin pointer for the streammux pick rule."""

    pointer: int = 0


def streammux_next(ready, state: MuxState) -> int:
    """Next stream to mux: round-robin over sources with a ready frame.

    ready holds per-stream ready counts (or truthy flags). Streams with
    nothing ready are skipped without consuming their turn; returns -1 when
    nothing is ready anywhere.
    """
    n = len(ready)
    for i in range(n):
        s = (state.pointer + i) % n
        if ready[s]:
            state.pointer = (s + 1) % n
            return s
    return -1


def cache_contention(plan, cat, concurrent_sm_stages) -> float:
    """Interval multiplier for stages sharing the SM cluster's L2.

    Only stages the plan actually places on the SM cluster contribute their
    model's working set; DLA-resident stages never do. Returns 1.0 under
    the L2 capacity, else the calibrated penalty.
    """
    total = 0
    any_sm = False
    for stage in concurrent_sm_stages:
        if plan.stage_engines.get(stage) != ENGINE_SM:
            continue
        name = plan.stage_models.get(stage)
        if name is None:
            continue
        any_sm = True
        total += sm_working_set_bytes(plan.models[name])
    if any_sm and total > cat.memory.l2_bytes:
        return cat.cost_params.cache_penalty_lambda
    return 1.0


def batching_factor(n_streams: int) -> float:
    """Per-frame inference time multiplier when n streams share an engine."""
    if n_streams < 1:
        raise ValueError("stream count must be positive")
    return (1.0 + (n_streams - 1) * BATCH_MARGINAL_FRAC) / n_streams


@dataclass(frozen=True)
class StageTables:
    """Kernel-ready arrays for one scenario."""

    arrival: np.ndarray
    decode_next: np.ndarray
    lat: np.ndarray
    intv: np.ndarray
    comp: np.ndarray
    res_tab: np.ndarray
    faces: np.ndarray
    n_streams: int
    frames_per_stream: int
    queue_cap: int
    reorder_cap: int
    scheme: str


_UNBOUNDED_QUEUE = 1 << 30


def _reference_scheme(params: CostParams) -> str:
    fitted = params.schemes()
    if not fitted:
        raise CalibrationError("cost parameters carry no fitted stage tables")
    for scheme in SCHEMES:
        if scheme in fitted:
            return scheme
    return fitted[0]


def _stage_engine_ids(sc: Scenario):
    plan = sc.plan
    det = plan.stage_engines.get("detect", ENGINE_SM)
    rec = plan.stage_engines.get("recognize", ENGINE_SM)
    return (ENGINE_NVDEC, ENGINE_CPU, ENGINE_PVA, det, rec, ENGINE_NVENC)


def build_stage_tables(sc: Scenario) -> StageTables:
    params = sc.catalog.cost_params
    plan = sc.plan
    scheme = plan.scheme
    S = len(sc.sources)
    F = sc.duration_frames
    n = S * F

    engines = _stage_engine_ids(sc)
    res_row = np.array([RESOURCE_INDEX[e] for e in engines], dtype=np.int64)
    res_tab = np.tile(res_row, (n, 1))
    if sc.hypothetical_dual_dla:
        # Stream-parity DLA assignment for DLA-resident inference stages;
        # explores running one model per DLA for two streams at once.
        for k in (3, 4):
            if engines[k] in (ENGINE_DLA0, ENGINE_DLA1):
                for s in range(S):
                    dla = ENGINE_DLA0 if s % 2 == 0 else ENGINE_DLA1
                    res_tab[s * F:(s + 1) * F, k] = RESOURCE_INDEX[dla]

    faces = np.zeros(n, dtype=np.int64)
    arrival = np.zeros(n)
    for s, src in enumerate(sc.sources):
        for k in range(F):
            g = s * F + k
            faces[g] = src.faces_at(k)
            if sc.pacing != PACING_SATURATED:
                arrival[g] = k / src.fps

    decode_next = np.empty(n, dtype=np.int64)
    for s, src in enumerate(sc.sources):
        if sc.pacing == PACING_SATURATED:
            per_gop = decode_order(src.gop_pattern)
            gop_len = len(src.gop_pattern)
            pos = 0
            base = 0
            while base < F:
                if base + gop_len <= F:
                    chunk = per_gop
                else:
                    chunk = decode_order(src.gop_pattern[: F - base])
                for disp in chunk:
                    decode_next[s * F + pos] = s * F + base + disp
                    pos += 1
                base += gop_len
        else:
            # Paced feeds hand the decoder one display-ordered frame per
            # period; decode-order scrambling only shows up under saturation.
            decode_next[s * F: (s + 1) * F] = np.arange(s * F, (s + 1) * F)

    overrides = sc.stage_time_overrides
    jf = sc.jitter_frac if sc.jitter_frac is not None else params.jitter_frac
    if overrides is not None:
        jf = 0.0
    rng = np.random.default_rng(sc.seed)
    if jf > 0.0:
        jit = rng.uniform(1.0 - jf, 1.0 + jf, size=(n, 6))
    else:
        jit = np.ones((n, 6))

    lat = np.zeros((n, 6))
    intv = np.zeros((n, 6))
    comp = np.zeros((n, 6))

    if overrides is not None:
        for k, stage in enumerate(SIM_STAGES):
            entry = overrides.get(stage)
            if entry is None:
                continue
            seconds, engine_id = entry
            if engine_id not in RESOURCE_INDEX:
                raise ConfigError("unknown engine %r in stage override" % engine_id)
            lat[:, k] = seconds
            intv[:, k] = seconds
            comp[:, k] = seconds
            res_tab[:, k] = RESOURCE_INDEX[engine_id]
        if not sc.enable_encoder:
            lat[:, 5] = 0.0
            intv[:, 5] = 0.0
            comp[:, 5] = 0.0
        return StageTables(
            arrival=arrival, decode_next=decode_next, lat=lat, intv=intv,
            comp=comp, res_tab=res_tab, faces=faces, n_streams=S,
            frames_per_stream=F,
            queue_cap=sc.queue_capacity_frames or _UNBOUNDED_QUEUE,
            reorder_cap=max(max(len(s.gop_pattern) for s in sc.sources),
                            sc.queue_capacity_frames or 1),
            scheme=scheme,
        )

    fitted = scheme if scheme in params.schemes() else None
    ref = fitted if fitted is not None else _reference_scheme(params)
    stage_s = params.stage_latency_s
    bases = params.decoder_bases_s[ref]
    mux_s = stage_s[(ref, "streammux")]
    pre_s = stage_s[(ref, "preprocess")]
    enc_s = stage_s[(ref, "encode")]
    if fitted is not None:
        det_s = stage_s[(fitted, "detect")]
        per_face = recognize_per_face_s(params, fitted)
    else:
        det_s = plan.stage_costs_s["detect"]
        rec_total = plan.stage_costs_s["recognize"]
        per_face = (rec_total - params.recognize_overhead_s) / params.faces_mean
        if per_face <= 0.0:
            raise CalibrationError(
                "planned recognize cost below the fixed overhead")

    beta = params.interval_scale.get(scheme, DEFAULT_INTERVAL_SCALE)
    lam = plan.sm_contention_lambda
    m = batching_factor(S)
    sm_idx = RESOURCE_INDEX[ENGINE_SM]

    for s, src in enumerate(sc.sources):
        gop = src.gop_pattern
        for k in range(F):
            g = s * F + k
            lat[g, 0] = bases[_FRAME_TYPE_INDEX[gop[k % len(gop)]]] * jit[g, 0]
    intv[:, 0] = beta * lat[:, 0]
    comp[:, 0] = lat[:, 0]

    # Mux copy time is bandwidth bound, not kernel bound; it does not jitter.
    lat[:, 1] = mux_s
    intv[:, 1] = params.mux_interval_s
    comp[:, 1] = params.mux_interval_s

    lat[:, 2] = pre_s * jit[:, 2]
    intv[:, 2] = beta * lat[:, 2]
    comp[:, 2] = lat[:, 2]

    lat[:, 3] = det_s * m * jit[:, 3]
    lat[:, 4] = (params.recognize_overhead_s + faces * per_face) * m * jit[:, 4]
    for k in (3, 4):
        contended = res_tab[:, k] == sm_idx
        intv[:, k] = beta * lat[:, k] * np.where(contended, lam, 1.0)
        comp[:, k] = lat[:, k]

    if sc.enable_encoder:
        lat[:, 5] = enc_s * jit[:, 5]
        intv[:, 5] = beta * lat[:, 5]
        comp[:, 5] = lat[:, 5]

    return StageTables(
        arrival=arrival, decode_next=decode_next, lat=lat, intv=intv,
        comp=comp, res_tab=res_tab, faces=faces, n_streams=S,
        frames_per_stream=F,
        queue_cap=sc.queue_capacity_frames or _UNBOUNDED_QUEUE,
        reorder_cap=max(max(len(s.gop_pattern) for s in sc.sources),
                        sc.queue_capacity_frames or 1),
        scheme=scheme,
    )


def measure_power(plan, catalog, busy_seconds: Mapping, elapsed_s: float):
    """Average power by rail from per-engine busy time over a run.

    Device-to-device traffic in the plan keeps a host core copying between
    memory regions, which shows up as a flat CPU adder for the whole run.
    """
    def util(engine_id):
        if elapsed_s <= 0.0:
            return 0.0
        return min(1.0, max(0.0, busy_seconds.get(engine_id, 0.0) / elapsed_s))

    cuda = power_draw(catalog, catalog.engine(ENGINE_SM), util(ENGINE_SM))
    cpu = power_draw(catalog, catalog.engine(ENGINE_CPU), util(ENGINE_CPU))
    if elapsed_s > 0.0 and len(plan.dtod_events()) > 0:
        cpu += catalog.cost_params.cpu_dtod_power_mw
    dla = sum(
        power_draw(catalog, catalog.engine(e), util(e))
        for e in (ENGINE_DLA0, ENGINE_DLA1)
    )
    return {
        "cuda": cuda,
        "cpu": cpu,
        "dla": dla,
        "total": cuda + cpu + dla,
    }


def analytic_throughput(plan, sc: Scenario) -> float:
    """Closed-form saturated throughput: 1 / busiest per-frame occupancy.

    Valid only for deterministic service times (zero jitter or explicit
    stage-time overrides); refuses stochastic scenarios so it can serve as
    an independent oracle for the event loop.
    """
    jf = sc.jitter_frac
    if jf is None:
        jf = sc.catalog.cost_params.jitter_frac
    if sc.stage_time_overrides is None and jf > 0.0:
        raise ValidationError(
            ["analytic throughput needs deterministic service times"])
    tables = build_stage_tables(sc)
    n = tables.lat.shape[0]
    occupancy = np.zeros(len(RESOURCE_ORDER))
    for k in range(6):
        for r in range(len(RESOURCE_ORDER)):
            mask = tables.res_tab[:, k] == r
            occupancy[r] += tables.intv[mask, k].sum()
    occupancy /= n
    peak = occupancy.max()
    if peak <= 0.0:
        raise ValidationError(["scenario has no positive service time"])
    return 1.0 / peak


@dataclass(frozen=True)
class KernelOutput:
    release_t: np.ndarray
    comp_t: np.ndarray
    busy_work: np.ndarray
    busy_intv: np.ndarray
    completed: int


def run_kernel(tables: StageTables, horizon_s: float = np.inf,
               mode: Optional[str] = None) -> KernelOutput:
    kernel = get_kernel(mode)
    release_t, comp_t, busy_work, busy_intv, completed = kernel(
        tables.arrival, tables.decode_next, tables.lat, tables.intv,
        tables.comp, tables.res_tab, tables.n_streams,
        tables.frames_per_stream, tables.queue_cap, tables.reorder_cap,
        len(RESOURCE_ORDER), horizon_s,
    )
    return KernelOutput(
        release_t=release_t, comp_t=comp_t, busy_work=busy_work,
        busy_intv=busy_intv, completed=int(completed),
    )


def simulate(sc: Scenario, kernel_mode: Optional[str] = None):
    """Run one scenario to completion and aggregate the report."""
    from .report import assemble_report

    violations = validate_scenario(sc)
    if violations:
        raise ValidationError(violations)
    tables = build_stage_tables(sc)
    out = run_kernel(tables, horizon_s=sc.horizon_s, mode=kernel_mode)
    return assemble_report(sc, tables, out)
