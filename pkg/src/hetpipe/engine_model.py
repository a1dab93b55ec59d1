"""Hardware engine catalog, compute-cost and power models, and calibration.

The catalog describes one Jetson AGX Orin style part: a 16-SM GPU cluster,
two deep-learning accelerators with a private 2 MiB buffer each, a vision
preprocessor, fixed-function video decode/encode engines, and the host CPU.
Costs are modeled as macs / rate with a per-(model, engine-class) scale
factor fitted from measured stage latencies; power is linear in utilization
between an idle floor and a full-load ceiling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from typing import Mapping, Optional

from .errors import CalibrationError, CapabilityError, ConfigError
from .model_graph import (
    LayerKind,
    ModelGraph,
    Precision,
    build_facedetect,
    build_facenet,
    layer_working_set,
    toposort,
    with_precision,
)


class EngineClass(str, Enum):
    SIMT_CLUSTER = "SimtCluster"
    DEEP_LEARNING_ACCEL = "DeepLearningAccel"
    VISION_ACCEL = "VisionAccel"
    VIDEO_DECODE = "VideoDecode"
    VIDEO_ENCODE = "VideoEncode"
    HOST_CPU = "HostCpu"


# Canonical engine ids used across plans, reports, and the simulator.
ENGINE_SM = "SM_CLUSTER"
ENGINE_DLA0 = "DLA0"
ENGINE_DLA1 = "DLA1"
ENGINE_PVA = "PVA"
ENGINE_NVDEC = "NVDEC"
ENGINE_NVENC = "NVENC"
ENGINE_CPU = "CPU"

# Pipeline stage names as they appear in measurement tables and reports.
STAGES = ("decoder", "streammux", "detect", "recognize", "encode")

# Model-to-engine allocation schemes, in report/table row order.
SCHEME_FDFN_GPU = "fdfn_gpu"
SCHEME_FD_DLA_FN_GPU = "fd_dla_fn_gpu"
SCHEME_FD_GPU_FN_DLA = "fd_gpu_fn_dla"
SCHEME_FDFN_DLA = "fdfn_dla"
SCHEMES = (
    SCHEME_FDFN_GPU,
    SCHEME_FD_DLA_FN_GPU,
    SCHEME_FD_GPU_FN_DLA,
    SCHEME_FDFN_DLA,
)

# (detect engine, recognize engine) per scheme.
SCHEME_ENGINES = {
    SCHEME_FDFN_GPU: (ENGINE_SM, ENGINE_SM),
    SCHEME_FD_DLA_FN_GPU: (ENGINE_DLA0, ENGINE_SM),
    SCHEME_FD_GPU_FN_DLA: (ENGINE_SM, ENGINE_DLA1),
    SCHEME_FDFN_DLA: (ENGINE_DLA0, ENGINE_DLA1),
}

# Measured single-stream service-time targets (ms per frame) used to place
# each scheme's pipeline initiation interval; index matches SCHEMES.
SERVICE_TARGETS_MS = {
    SCHEME_FDFN_GPU: 5.2,
    SCHEME_FD_DLA_FN_GPU: 4.9,
    SCHEME_FD_GPU_FN_DLA: 15.8,
    SCHEME_FDFN_DLA: 16.1,
}

# Power anchor points for the SM cluster at the calibration operating points
# (single 1080p30 stream): absolute draw under the all-GPU scheme and the
# step down when detection moves off the GPU.
SM_POWER_ANCHOR_MW = 4635.0
SM_POWER_STEP_MW = 300.0
CPU_IDLE_MW = 2000.0
CPU_ACTIVE_MW = 4000.0
DLA_IDLE_MW = 50.0
DLA_PERF_PER_WATT_RATIO = 2.5

CALIBRATION_FPS = 30.0
DEFAULT_GOP = "IBBPBBPBBPBB"
# Relative decode effort per frame type; B frames are the heaviest.
DECODE_WEIGHTS = {"I": 1.0, "P": 2.0, "B": 5.0}

PREPROCESS_MS = 0.3
MUX_INTERVAL_MS = 0.5
RECOGNIZE_OVERHEAD_MS = 0.5
FACES_MEAN = 4.0
DEFAULT_INTERVAL_SCALE = 1.0 / 3.0

MEASUREMENTS_HEADER = ("scheme", "stage", "avg_ms")


@dataclass(frozen=True)
class Engine:
    """One hardware engine: compute rates by precision plus a power line."""

    id: str
    klass: EngineClass
    compute_rate: Mapping[Precision, float]
    local_buffer_bytes: int = 0
    active_power_mw: float = 0.0
    idle_power_mw: float = 0.0
    perf_per_watt_scale: float = 1.0
    units: int = 1
    lanes_per_unit: int = 0
    stream_capacity: Mapping[str, int] = field(default_factory=dict)

    def rate_for(self, precision: Precision) -> float:
        rate = self.compute_rate.get(precision)
        if rate is None or rate <= 0.0:
            raise CapabilityError(
                "engine %s does not support %s" % (self.id, precision.value)
            )
        return rate


@dataclass(frozen=True)
class MemoryHierarchy:
    l1_bytes_per_sm: int = 192 * 1024
    l2_bytes: int = 4 * 2**20
    l2_latency_cycles: int = 200
    dram_bytes: int = 64 * 2**30
    dram_bandwidth_bytes_per_s: float = 204.08e9

    def __post_init__(self):
        if min(self.l1_bytes_per_sm, self.l2_bytes, self.l2_latency_cycles,
               self.dram_bytes, self.dram_bandwidth_bytes_per_s) <= 0:
            raise ValueError("memory hierarchy fields must be positive")
        if not self.l1_bytes_per_sm < self.l2_bytes < self.dram_bytes:
            raise ValueError("expected l1 < l2 < dram")


@dataclass(frozen=True)
class DlaCapabilities:
    kernel_min: int = 1
    kernel_max: int = 32
    channels_min: int = 1
    channels_max: int = 8192
    supported_kinds: frozenset = frozenset({
        LayerKind.CONV,
        LayerKind.DECONV,
        LayerKind.FULLY_CONNECTED,
        LayerKind.ACTIVATION,
        LayerKind.POOLING,
        LayerKind.BATCH_NORM,
    })
    supported_pool_modes: frozenset = frozenset({"max", "avg"})
    supported_precisions: frozenset = frozenset({Precision.FP16, Precision.INT8})


def dla_support_reason(node, caps: DlaCapabilities) -> Optional[str]:
    """First failing admission rule for a layer on a DLA, or None if it fits.

    Rules apply in a fixed order: kind, precision, kernel, channels.
    """
    if node.kind not in caps.supported_kinds:
        return "kind"
    if node.kind is LayerKind.POOLING and node.pool_mode not in caps.supported_pool_modes:
        return "kind"
    if node.precision not in caps.supported_precisions:
        return "precision"
    if node.kernel is not None:
        kh, kw = node.kernel
        if not (caps.kernel_min <= kh <= caps.kernel_max
                and caps.kernel_min <= kw <= caps.kernel_max):
            return "kernel"
    for ch in (node.in_channels, node.out_channels):
        if not (caps.channels_min <= ch <= caps.channels_max):
            return "channels"
    return None


@dataclass(frozen=True)
class CostParams:
    """Calibration output: cost scales plus fitted pipeline timing tables.

    scale maps (model name, engine class) to a multiplier on raw compute
    time. The stage tables are keyed by (scheme, stage); detect entries are
    net of the fixed preprocess cost so the preprocess stage can run on its
    own engine and the reported detect column still matches the fitted sum.
    """

    scale: Mapping = field(default_factory=dict)
    zero_mac_overhead_s: float = 10e-6
    dtod_transfer_overhead_s: float = 20e-6
    cache_penalty_lambda: float = 1.08
    cpu_dtod_power_mw: float = 500.0
    jitter_frac: float = 0.30
    preprocess_s: float = PREPROCESS_MS * 1e-3
    mux_interval_s: float = MUX_INTERVAL_MS * 1e-3
    recognize_overhead_s: float = RECOGNIZE_OVERHEAD_MS * 1e-3
    faces_mean: float = FACES_MEAN
    stage_latency_s: Mapping = field(default_factory=dict)
    decoder_bases_s: Mapping = field(default_factory=dict)
    interval_scale: Mapping = field(default_factory=dict)
    service_target_s: Mapping = field(default_factory=dict)
    measured_stage_s: Mapping = field(default_factory=dict)

    def __post_init__(self):
        for key, value in self.scale.items():
            if value <= 0.0:
                raise ValueError("non-positive scale factor for %r" % (key,))
        if self.cache_penalty_lambda < 1.0:
            raise ValueError("cache_penalty_lambda must be >= 1")

    def scale_for(self, model_name: str, klass: EngineClass) -> float:
        return self.scale.get((model_name, klass), 1.0)

    def schemes(self):
        return tuple(sorted({s for s, _ in self.stage_latency_s}))

    def predicted_measurements(self):
        """Stage averages the fitted tables reproduce, in measurement form."""
        out = {}
        for scheme in self.schemes():
            lat = lambda st: self.stage_latency_s[(scheme, st)] * 1e3
            out[(scheme, "decoder")] = lat("decoder")
            out[(scheme, "streammux")] = lat("streammux")
            out[(scheme, "detect")] = lat("detect") + self.preprocess_s * 1e3
            out[(scheme, "recognize")] = lat("recognize")
            out[(scheme, "encode")] = lat("encode")
        return out


@dataclass(frozen=True)
class EngineCatalog:
    engines: tuple
    memory: MemoryHierarchy
    dla_caps: DlaCapabilities
    cost_params: CostParams

    def engine(self, engine_id: str) -> Engine:
        for eng in self.engines:
            if eng.id == engine_id:
                return eng
        raise KeyError("no engine %r in catalog" % engine_id)

    def engines_of_class(self, klass: EngineClass):
        return tuple(e for e in self.engines if e.klass is klass)

    def with_cost_params(self, params: CostParams) -> "EngineCatalog":
        return replace(self, cost_params=params)


@dataclass(frozen=True)
class BalanceProblem:
    c_gpu_s: float
    c_dla_s: float


@dataclass(frozen=True)
class BalanceSolution:
    t_gpu: float
    t_dla: float
    stage_time_s: float


def _default_measurements_text() -> str:
    return (
        resources.files("hetpipe")
        .joinpath("data/default_stage_measurements.csv")
        .read_text(encoding="utf-8")
    )


def parse_measurements(text: str):
    """Parse a stage measurement table (CSV: scheme,stage,avg_ms)."""
    rows = list(csv.reader(text.strip().splitlines()))
    if not rows or tuple(h.strip() for h in rows[0]) != MEASUREMENTS_HEADER:
        raise CalibrationError(
            "measurement table must start with header %s" % ",".join(MEASUREMENTS_HEADER)
        )
    table = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise CalibrationError("line %d: expected 3 fields" % lineno)
        scheme, stage, avg = (f.strip() for f in row)
        if stage not in STAGES:
            raise CalibrationError("line %d: unknown stage %r" % (lineno, stage))
        try:
            value = float(avg)
        except ValueError:
            raise CalibrationError("line %d: bad avg_ms %r" % (lineno, avg)) from None
        if (scheme, stage) in table:
            raise CalibrationError("line %d: duplicate row %s/%s" % (lineno, scheme, stage))
        table[(scheme, stage)] = value
    return table


def load_measurements(path=None):
    """Load a measurement table from path, or the shipped defaults."""
    if path is None:
        return parse_measurements(_default_measurements_text())
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read calibration file %s: %s" % (path, exc)) from exc
    return parse_measurements(text)


def default_measurements():
    return parse_measurements(_default_measurements_text())


def gop_mean_decode_weight(gop_pattern: str) -> float:
    if not gop_pattern or gop_pattern[0] != "I":
        raise ValueError("GOP pattern must start with I")
    try:
        total = sum(DECODE_WEIGHTS[c] for c in gop_pattern)
    except KeyError as exc:
        raise ValueError("GOP pattern may contain only I, P, B") from exc
    return total / len(gop_pattern)


def _solved_sm_power_line(measurements):
    """Idle/active SM power such that the linear model hits both anchors.

    The two operating points are the per-frame SM busy fractions of the
    all-GPU scheme (detect net of preprocess, plus recognize) and of the
    detect-offloaded scheme (recognize only), at the calibration frame rate.
    """
    period_ms = 1e3 / CALIBRATION_FPS
    u1 = (
        measurements[(SCHEME_FDFN_GPU, "detect")] - PREPROCESS_MS
        + measurements[(SCHEME_FDFN_GPU, "recognize")]
    ) / period_ms
    u2 = measurements[(SCHEME_FD_DLA_FN_GPU, "recognize")] / period_ms
    if not (0.0 < u2 < u1 <= 1.0):
        raise CalibrationError("SM power anchors need 0 < u2 < u1 <= 1")
    slope = SM_POWER_STEP_MW / (u1 - u2)
    idle = SM_POWER_ANCHOR_MW - slope * u1
    return idle, idle + slope


def default_orin_catalog(cost_params: Optional[CostParams] = None) -> EngineCatalog:
    """Catalog for the target part with fitted default power lines."""
    meas = default_measurements()
    sm_idle, sm_active = _solved_sm_power_line(meas)
    sm_rates = {
        Precision.INT8: 85e12,
        Precision.FP16: 42.5e12,
        Precision.FP32: 21.25e12,
    }
    dla_rates = {Precision.INT8: 52.5e12, Precision.FP16: 26.25e12}
    # Place DLA full-load power on the fixed perf-per-watt ratio vs the SMs.
    sm_perf_per_w = sm_rates[Precision.INT8] / (sm_active / 1e3)
    dla_active = dla_rates[Precision.INT8] / (DLA_PERF_PER_WATT_RATIO * sm_perf_per_w) * 1e3
    memory = MemoryHierarchy()
    engines = (
        Engine(
            id=ENGINE_SM,
            klass=EngineClass.SIMT_CLUSTER,
            compute_rate=sm_rates,
            local_buffer_bytes=16 * memory.l1_bytes_per_sm,
            active_power_mw=sm_active,
            idle_power_mw=sm_idle,
            units=16,
            lanes_per_unit=128,
        ),
        Engine(
            id=ENGINE_DLA0,
            klass=EngineClass.DEEP_LEARNING_ACCEL,
            compute_rate=dla_rates,
            local_buffer_bytes=2 * 2**20,
            active_power_mw=dla_active,
            idle_power_mw=DLA_IDLE_MW,
            perf_per_watt_scale=DLA_PERF_PER_WATT_RATIO,
        ),
        Engine(
            id=ENGINE_DLA1,
            klass=EngineClass.DEEP_LEARNING_ACCEL,
            compute_rate=dla_rates,
            local_buffer_bytes=2 * 2**20,
            active_power_mw=dla_active,
            idle_power_mw=DLA_IDLE_MW,
            perf_per_watt_scale=DLA_PERF_PER_WATT_RATIO,
        ),
        Engine(
            id=ENGINE_PVA,
            klass=EngineClass.VISION_ACCEL,
            compute_rate={Precision.INT8: 2e12, Precision.FP16: 1e12},
            active_power_mw=750.0,
            idle_power_mw=250.0,
        ),
        Engine(
            id=ENGINE_NVDEC,
            klass=EngineClass.VIDEO_DECODE,
            compute_rate={},
            active_power_mw=400.0,
            idle_power_mw=50.0,
            stream_capacity={"1080p": 24, "2160p": 6},
        ),
        Engine(
            id=ENGINE_NVENC,
            klass=EngineClass.VIDEO_ENCODE,
            compute_rate={},
            active_power_mw=400.0,
            idle_power_mw=50.0,
        ),
        Engine(
            id=ENGINE_CPU,
            klass=EngineClass.HOST_CPU,
            compute_rate={},
            active_power_mw=CPU_ACTIVE_MW,
            idle_power_mw=CPU_IDLE_MW,
            units=12,
        ),
    )
    cat = EngineCatalog(
        engines=engines,
        memory=memory,
        dla_caps=DlaCapabilities(),
        cost_params=cost_params if cost_params is not None else CostParams(),
    )
    assert len(cat.engines_of_class(EngineClass.DEEP_LEARNING_ACCEL)) == 2
    assert len(cat.engines_of_class(EngineClass.VISION_ACCEL)) == 1
    assert len(cat.engines_of_class(EngineClass.VIDEO_DECODE)) == 1
    assert len(cat.engines_of_class(EngineClass.VIDEO_ENCODE)) == 1
    assert len(cat.engines_of_class(EngineClass.SIMT_CLUSTER)) == 1
    dla_ppw = dla_rates[Precision.INT8] / (dla_active / 1e3)
    assert dla_ppw >= 2.0 * sm_perf_per_w
    return cat


def _layer_cost(params: CostParams, g: ModelGraph, node, engine: Engine) -> float:
    if node.macs == 0:
        return params.zero_mac_overhead_s
    rate = engine.rate_for(node.precision)
    return node.macs / rate * params.scale_for(g.name, engine.klass)


def layer_cost(cat: EngineCatalog, g: ModelGraph, layer_id: int, engine: Engine) -> float:
    """Seconds to run one layer on one engine under the catalog's params."""
    return _layer_cost(cat.cost_params, g, g.layer(layer_id), engine)


def model_cost(cat: EngineCatalog, g: ModelGraph, engine: Engine) -> float:
    """Whole-model time on one engine: layer costs summed in topological order."""
    total = 0.0
    for node in toposort(g).layers:
        total += _layer_cost(cat.cost_params, g, node, engine)
    return total


def solve_balance(p: BalanceProblem, mode: str = "equal_busy") -> BalanceSolution:
    """Split one model's work across GPU and DLA.

    equal_busy picks the fractions that equalize per-engine busy time (the
    minimal-makespan split for two engines working in parallel). literal
    assigns fractions proportional to each engine's own full-model time.
    """
    if p.c_gpu_s <= 0.0 or p.c_dla_s <= 0.0:
        raise ValueError("balance problem needs positive costs")
    total = p.c_gpu_s + p.c_dla_s
    if mode == "equal_busy":
        t_gpu = p.c_dla_s / total
    elif mode == "literal":
        t_gpu = p.c_gpu_s / total
    else:
        raise ValueError("unknown balance mode %r" % mode)
    t_dla = 1.0 - t_gpu
    stage = max(t_gpu * p.c_gpu_s, t_dla * p.c_dla_s)
    return BalanceSolution(t_gpu=t_gpu, t_dla=t_dla, stage_time_s=stage)


def power_draw(cat: EngineCatalog, engine: Engine, utilization: float) -> float:
    """Milliwatts drawn by an engine at a busy fraction, linear with floor."""
    if not 0.0 <= utilization <= 1.0:
        raise ValueError("utilization must be in [0, 1]")
    return engine.idle_power_mw + utilization * (engine.active_power_mw - engine.idle_power_mw)


def sm_working_set_bytes(g: ModelGraph) -> int:
    """Resident L2 footprint for one model on the SM cluster.

    Double-buffered peak layer working set: the heaviest layer's inputs,
    outputs, and parameters, twice over for ping-pong scheduling.
    """
    peak = 0
    for node in g.layers:
        if node.macs == 0:
            continue
        peak = max(peak, layer_working_set(g, node.id))
    return 2 * peak


def _split_sm_cost(params: CostParams, g: ModelGraph, engine: Engine):
    """(scalable mac-derived seconds, fixed zero-mac overhead seconds)."""
    compute = 0.0
    overhead = 0.0
    for node in g.layers:
        if node.macs == 0:
            overhead += params.zero_mac_overhead_s
        else:
            compute += _layer_cost(params, g, node, engine)
    return compute, overhead


def _raw_dla_cost(params: CostParams, g: ModelGraph, engine: Engine,
                  caps: DlaCapabilities) -> float:
    total = 0.0
    for node in g.layers:
        if dla_support_reason(node, caps) is None:
            total += _layer_cost(params, g, node, engine)
    return total


def _first_scheme_using(present, model_idx: int, engine_id_pred):
    for scheme in SCHEMES:
        if scheme not in present:
            continue
        engines = SCHEME_ENGINES[scheme]
        if engine_id_pred(engines[model_idx]):
            return scheme
    return None


def calibrate(measurements, *, catalog: Optional[EngineCatalog] = None,
              graphs=None, service_targets=None,
              default_interval_scale: float = DEFAULT_INTERVAL_SCALE) -> CostParams:
    """Fit cost scales and pipeline timing tables from stage averages.

    The scale for each (model, engine class) pair is measured stage time
    over raw model time, taken from the first scheme (in table order) that
    runs the model on that class. Stage service latencies come straight
    from the table; each scheme's initiation-interval scale is set so the
    busiest engine's per-frame occupancy equals the scheme's service-time
    target.
    """
    cat = catalog if catalog is not None else default_orin_catalog()
    if graphs is None:
        graphs = {"facedetect": build_facedetect(), "facenet": build_facenet()}
    targets = dict(SERVICE_TARGETS_MS)
    if service_targets:
        targets.update(service_targets)

    present = sorted({s for s, _ in measurements})
    if not present:
        raise CalibrationError("empty measurement table")
    for scheme in present:
        for stage in STAGES:
            if (scheme, stage) not in measurements:
                raise CalibrationError("scheme %s missing stage %s" % (scheme, stage))
    for key, value in measurements.items():
        if value <= 0.0:
            raise CalibrationError("non-positive measurement for %s/%s" % key)

    neutral = CostParams()
    preprocess_ms = neutral.preprocess_s * 1e3
    sm = cat.engine(ENGINE_SM)
    dla = cat.engines_of_class(EngineClass.DEEP_LEARNING_ACCEL)[0]

    # Cost scales: one fit per (model, engine class) pair the table exercises.
    scale = {}
    fit_specs = (
        ("facedetect", 0, "detect"),
        ("facenet", 1, "recognize"),
    )
    for model_name, model_idx, stage in fit_specs:
        g = graphs[model_name]
        sm_scheme = _first_scheme_using(present, model_idx, lambda e: e == ENGINE_SM)
        if sm_scheme is not None:
            compute, overhead = _split_sm_cost(
                neutral, with_precision(g, Precision.FP16), sm
            )
            measured_s = measurements[(sm_scheme, stage)] * 1e-3
            # The fixed zero-mac overheads are not scaled, so solve the scale
            # on the mac-derived share; model_cost then lands on the measured
            # average exactly.
            if measured_s <= overhead:
                raise CalibrationError(
                    "measured %s/%s below fixed per-layer overheads" % (sm_scheme, stage)
                )
            scale[(model_name, EngineClass.SIMT_CLUSTER)] = (measured_s - overhead) / compute
        dla_scheme = _first_scheme_using(present, model_idx, lambda e: e.startswith("DLA"))
        if dla_scheme is not None:
            raw = _raw_dla_cost(
                neutral, with_precision(g, Precision.INT8), dla, cat.dla_caps
            )
            if raw <= 0.0:
                raise CalibrationError("model %s has no DLA-eligible work" % model_name)
            scale[(model_name, EngineClass.DEEP_LEARNING_ACCEL)] = (
                measurements[(dla_scheme, stage)] * 1e-3 / raw
            )

    stage_latency_s = {}
    decoder_bases_s = {}
    interval_scale = {}
    service_target_s = {}
    mean_weight = gop_mean_decode_weight(DEFAULT_GOP)
    sm_ws = {name: sm_working_set_bytes(with_precision(g, Precision.FP16))
             for name, g in graphs.items()}

    for scheme in present:
        m = {st: measurements[(scheme, st)] for st in STAGES}
        det_net_ms = m["detect"] - preprocess_ms
        if det_net_ms <= 0.0:
            raise CalibrationError(
                "scheme %s: detect average must exceed the %.2f ms preprocess cost"
                % (scheme, preprocess_ms)
            )
        rec_var_ms = m["recognize"] - RECOGNIZE_OVERHEAD_MS
        if rec_var_ms <= 0.0:
            raise CalibrationError(
                "scheme %s: recognize average must exceed the fixed overhead" % scheme
            )
        stage_latency_s[(scheme, "decoder")] = m["decoder"] * 1e-3
        stage_latency_s[(scheme, "streammux")] = m["streammux"] * 1e-3
        stage_latency_s[(scheme, "preprocess")] = neutral.preprocess_s
        stage_latency_s[(scheme, "detect")] = det_net_ms * 1e-3
        stage_latency_s[(scheme, "recognize")] = m["recognize"] * 1e-3
        stage_latency_s[(scheme, "encode")] = m["encode"] * 1e-3

        unit = m["decoder"] / mean_weight * 1e-3
        bases = (
            DECODE_WEIGHTS["I"] * unit,
            DECODE_WEIGHTS["P"] * unit,
            DECODE_WEIGHTS["B"] * unit,
        )
        if not bases[0] <= bases[1] < bases[2]:
            raise CalibrationError("decoder frame-type bases must be ordered")
        decoder_bases_s[scheme] = bases

        # Per-frame occupancy of each engine at unit interval scale; the
        # streammux runs at a fixed small interval and is excluded.
        det_engine, rec_engine = SCHEME_ENGINES.get(scheme, (ENGINE_SM, ENGINE_SM))
        sm_stage_ms = []
        if det_engine == ENGINE_SM:
            sm_stage_ms.append(det_net_ms)
        if rec_engine == ENGINE_SM:
            sm_stage_ms.append(m["recognize"])
        ws_total = 0
        if det_engine == ENGINE_SM:
            ws_total += sm_ws["facedetect"]
        if rec_engine == ENGINE_SM:
            ws_total += sm_ws["facenet"]
        lam = 1.0
        if sm_stage_ms and ws_total > cat.memory.l2_bytes:
            lam = neutral.cache_penalty_lambda
        occupancy = {
            ENGINE_NVDEC: m["decoder"],
            ENGINE_PVA: preprocess_ms,
            ENGINE_NVENC: m["encode"],
            ENGINE_SM: lam * sum(sm_stage_ms),
        }
        occupancy[det_engine] = occupancy.get(det_engine, 0.0) + (
            0.0 if det_engine == ENGINE_SM else det_net_ms
        )
        occupancy[rec_engine] = occupancy.get(rec_engine, 0.0) + (
            0.0 if rec_engine == ENGINE_SM else m["recognize"]
        )
        bottleneck_ms = max(occupancy.values())
        if scheme in targets:
            target_ms = targets[scheme]
            if target_ms <= 0.0:
                raise CalibrationError("non-positive service target for %s" % scheme)
            interval_scale[scheme] = target_ms / bottleneck_ms
            service_target_s[scheme] = target_ms * 1e-3
        else:
            interval_scale[scheme] = default_interval_scale
            service_target_s[scheme] = default_interval_scale * bottleneck_ms * 1e-3

    return CostParams(
        scale=scale,
        stage_latency_s=stage_latency_s,
        decoder_bases_s=decoder_bases_s,
        interval_scale=interval_scale,
        service_target_s=service_target_s,
        measured_stage_s={k: v * 1e-3 for k, v in measurements.items()},
    )


def recognize_per_face_s(params: CostParams, scheme: str) -> float:
    """Per-face share of the recognize latency at the calibrated face count."""
    base = params.stage_latency_s.get((scheme, "recognize"))
    if base is None:
        raise CalibrationError("scheme %s not present in calibration" % scheme)
    var = base - params.recognize_overhead_s
    if var <= 0.0 or params.faces_mean <= 0.0:
        raise CalibrationError("recognize latency below fixed overhead for %s" % scheme)
    return var / params.faces_mean
