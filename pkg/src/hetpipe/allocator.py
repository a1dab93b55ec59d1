"""Layer placement: DLA eligibility, lowering emulation, and allocation plans.

A plan assigns every layer of every model to one engine, lists the layers
that fell back from a DLA to the GPU, and accounts for the memory transfers
the placement implies. GPU islands are maximal runs of GPU-assigned layers
strictly between DLA-assigned layers; each island costs two device-to-device
copies. Host entry/exit and the handoff between pipeline stages ride the
shared buffers and are tracked as pipeline-level events.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Mapping, Optional, Tuple

from .engine_model import (
    ENGINE_DLA0,
    ENGINE_DLA1,
    ENGINE_SM,
    SCHEME_ENGINES,
    SCHEMES,
    BalanceProblem,
    DlaCapabilities,
    EngineCatalog,
    EngineClass,
    dla_support_reason,
    model_cost,
    layer_cost,
    sm_working_set_bytes,
    solve_balance,
)
from .errors import ConfigError
from .model_graph import (
    LayerKind,
    LayerNode,
    ModelGraph,
    Precision,
    build_facedetect,
    build_facenet,
    toposort,
    validate,
    with_precision,
)

SCHEME_LAYER_BALANCED = "layer_balanced"
PLAN_SCHEMES = SCHEMES + (SCHEME_LAYER_BALANCED,)

# Kinds that cannot run in INT8 and fall back to FP16 on a DLA, plus the
# first convolution (its input tensor stays in half precision).
INT8_INCAPABLE_KINDS = frozenset({
    LayerKind.FULLY_CONNECTED,
    LayerKind.POOLING,
    LayerKind.ACTIVATION,
    LayerKind.POW,
    LayerKind.L2_NORM,
})

PIPELINE_MODEL = "pipeline"


class TransferDirection(str, Enum):
    DEVICE_TO_DEVICE = "DtoD"
    HOST_TO_DEVICE = "HtoD"
    DEVICE_TO_HOST = "DtoH"


@dataclass(frozen=True)
class DlaSupport:
    supported: bool
    reason: Optional[str] = None


@dataclass(frozen=True)
class TransferEvent:
    direction: TransferDirection
    bytes: int
    boundary: Tuple[int, int]
    model: str = PIPELINE_MODEL


@dataclass(frozen=True)
class AllocationPlan:
    scheme: str
    models: Mapping[str, ModelGraph]
    layer_assignments: Mapping
    fallback_layers: tuple
    transfer_events: tuple
    stage_engines: Mapping[str, str]
    stage_costs_s: Mapping[str, float]
    stage_models: Mapping[str, str] = field(default_factory=dict)
    balance: Mapping = field(default_factory=dict)
    sm_contention_lambda: float = 1.0
    notes: tuple = ()

    def assignments_for(self, model_name: str):
        return {lid: eng for (m, lid), eng in self.layer_assignments.items()
                if m == model_name}

    def dtod_events(self, model_name: Optional[str] = None):
        events = [e for e in self.transfer_events
                  if e.direction is TransferDirection.DEVICE_TO_DEVICE]
        if model_name is not None:
            events = [e for e in events if e.model == model_name]
        return tuple(events)


def classify_dla_support(layer: LayerNode, caps: DlaCapabilities) -> DlaSupport:
    """Admission check for one layer on a DLA engine.

    Rules apply in a fixed order (kind, precision, kernel, channels) and the
    returned reason names the first one that failed.
    """
    reason = dla_support_reason(layer, caps)
    if reason is None:
        return DlaSupport(supported=True)
    return DlaSupport(supported=False, reason=reason)


@lru_cache(maxsize=1)
def _lowering_rules():
    text = (
        resources.files("hetpipe")
        .joinpath("data/facenet_lowering_rules.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


def _is_dla_target(target) -> bool:
    target_id = getattr(target, "id", target)
    return isinstance(target_id, str) and target_id.startswith("DLA")


def emulate_lowering(g: ModelGraph, target) -> ModelGraph:
    """Insert the reformat layers a compiler adds when targeting a DLA.

    Each rule inserts Constant+Shuffle pairs in front of a composite block
    whose internal tensor layout differs from its producer. The rule table
    ships as data; models without rules pass through unchanged, as does any
    non-DLA target. Applying the transform twice adds nothing.
    """
    if not _is_dla_target(target):
        return g
    rules = _lowering_rules().get(g.name)
    if not rules:
        return g

    nodes = list(g.layers)
    by_id = {n.id: n for n in nodes}
    next_id = max(by_id) + 1
    for rule in sorted(rules, key=lambda r: r["before_id"]):
        node = by_id.get(rule["before_id"])
        if node is None:
            raise ConfigError(
                "lowering rule for %s names missing layer %s" % (g.name, rule["before_id"])
            )
        if not node.preds:
            raise ConfigError("lowering rule cannot apply to a source layer")
        prev = by_id[node.preds[0]]
        if prev.kind is LayerKind.SHUFFLE:
            continue  # already lowered
        pos = nodes.index(node)
        upstream = prev
        chain = []
        for _ in range(int(rule["pairs"])):
            const = LayerNode(
                id=next_id,
                kind=LayerKind.CONSTANT,
                kernel=None,
                stride=None,
                in_channels=upstream.out_channels,
                out_channels=upstream.out_channels,
                output_dims=upstream.output_dims,
                precision=upstream.precision,
                macs=0,
                preds=(upstream.id,),
                succs=(),
            )
            next_id += 1
            shuf = LayerNode(
                id=next_id,
                kind=LayerKind.SHUFFLE,
                kernel=None,
                stride=None,
                in_channels=const.out_channels,
                out_channels=const.out_channels,
                output_dims=const.output_dims,
                precision=const.precision,
                macs=0,
                preds=(const.id,),
                succs=(),
            )
            next_id += 1
            chain.extend((const, shuf))
            upstream = shuf
        new_preds = tuple(upstream.id if p == prev.id else p for p in node.preds)
        patched = replace(node, preds=new_preds)
        nodes[pos:pos + 1] = chain + [patched]
        by_id[patched.id] = patched
        for n in chain:
            by_id[n.id] = n

    lowered = g.rebuild(nodes)
    violations = validate(lowered)
    if violations:
        raise ConfigError("lowering produced an invalid graph: %s" % violations[0])
    return lowered


def precision_fallback(g: ModelGraph, engine) -> ModelGraph:
    """Rewrite INT8 layers a DLA cannot quantize to FP16.

    Applies only when the target is a DLA; the set of incapable layers is
    the fixed kinds plus the first convolution. Topology is preserved.
    """
    klass = getattr(engine, "klass", None)
    if klass is not EngineClass.DEEP_LEARNING_ACCEL and not _is_dla_target(engine):
        return g
    first_conv = None
    for node in toposort(g).layers:
        if node.kind is LayerKind.CONV:
            first_conv = node.id
            break
    changed = []
    for node in g.layers:
        if node.precision is Precision.INT8 and (
            node.kind in INT8_INCAPABLE_KINDS or node.id == first_conv
        ):
            changed.append(replace(node, precision=Precision.FP16))
        else:
            changed.append(node)
    return g.rebuild(changed)


def count_dla_unsupported(g: ModelGraph, caps: DlaCapabilities):
    """Unsupported executable layers by kind (Input/Output excluded)."""
    counts = {}
    for node in g.layers:
        if node.kind in (LayerKind.INPUT, LayerKind.OUTPUT):
            continue
        if dla_support_reason(node, caps) is not None:
            counts[node.kind] = counts.get(node.kind, 0) + 1
    return counts


def _interior_islands(order, assignment, dla_ids):
    """Maximal GPU runs strictly between DLA-assigned layers.

    order: layer ids in topological order, Input/Output excluded.
    Returns a list of (prev_dla_id, [island ids], next_dla_id).
    """
    islands = []
    run = []
    prev_dla = None
    for lid in order:
        if assignment[lid] in dla_ids:
            if run and prev_dla is not None:
                islands.append((prev_dla, run, lid))
            run = []
            prev_dla = lid
        else:
            run = run + [lid]
    return islands


def _island_events(g: ModelGraph, order, assignment, dla_ids):
    events = []
    for prev_dla, island, next_dla in _interior_islands(order, assignment, dla_ids):
        first, last = island[0], island[-1]
        events.append(TransferEvent(
            direction=TransferDirection.DEVICE_TO_DEVICE,
            bytes=g.layer(prev_dla).output_bytes(),
            boundary=(prev_dla, first),
            model=g.name,
        ))
        events.append(TransferEvent(
            direction=TransferDirection.DEVICE_TO_DEVICE,
            bytes=g.layer(last).output_bytes(),
            boundary=(last, next_dla),
            model=g.name,
        ))
    return events


def _compute_order(g: ModelGraph):
    return [n.id for n in toposort(g).layers
            if n.kind not in (LayerKind.INPUT, LayerKind.OUTPUT)]


def island_events(g: ModelGraph, assignment, dla_ids=None):
    """Transfer events implied by a layer assignment: 2 DtoDs per GPU island."""
    if dla_ids is None:
        dla_ids = {ENGINE_DLA0, ENGINE_DLA1}
    order = [lid for lid in _compute_order(g) if lid in assignment]
    return tuple(_island_events(g, order, assignment, set(dla_ids)))


def _place_on_dla(g: ModelGraph, cat: EngineCatalog, dla_id: str):
    """Assign a whole model to one DLA with per-layer GPU fallback."""
    assignment = {}
    fallbacks = []
    for node in g.layers:
        if node.kind in (LayerKind.INPUT, LayerKind.OUTPUT):
            assignment[node.id] = ENGINE_SM
            continue
        support = classify_dla_support(node, cat.dla_caps)
        if support.supported:
            assignment[node.id] = dla_id
        else:
            assignment[node.id] = ENGINE_SM
            fallbacks.append((g.name, node.id, support.reason))
    events = _island_events(g, _compute_order(g), assignment, {dla_id})
    return assignment, fallbacks, events


def _assigned_cost(cat: EngineCatalog, g: ModelGraph, assignment) -> float:
    total = 0.0
    for node in g.layers:
        total += layer_cost(cat, g, node.id, cat.engine(assignment[node.id]))
    return total


def _events_cost(cat: EngineCatalog, events) -> float:
    bw = cat.memory.dram_bandwidth_bytes_per_s
    overhead = cat.cost_params.dtod_transfer_overhead_s
    return sum(e.bytes / bw + overhead for e in events)


def _contention_lambda(cat: EngineCatalog, sm_models) -> float:
    if not sm_models:
        return 1.0
    ws = sum(sm_working_set_bytes(g) for g in sm_models)
    if ws > cat.memory.l2_bytes:
        return cat.cost_params.cache_penalty_lambda
    return 1.0


def cache_contention_lambda(cat: EngineCatalog, sm_resident_graphs) -> float:
    """Interval multiplier for SM stages sharing the last-level cache."""
    return _contention_lambda(cat, list(sm_resident_graphs))


def plan_model_level(scheme: str, fd: ModelGraph, fn: ModelGraph,
                     cat: EngineCatalog) -> AllocationPlan:
    """Whole-model placement for one of the four allocation schemes."""
    if scheme not in SCHEME_ENGINES:
        raise ConfigError("invalid scheme %r (one of %s)" % (scheme, ", ".join(SCHEMES)))
    det_engine, rec_engine = SCHEME_ENGINES[scheme]

    models = {}
    assignments = {}
    fallbacks = []
    events = []
    stage_costs = {}
    sm_models = []
    for name, g, engine_id, stage in (
        (fd.name, fd, det_engine, "detect"),
        (fn.name, fn, rec_engine, "recognize"),
    ):
        if engine_id == ENGINE_SM:
            gg = with_precision(g, Precision.FP16)
            assignment = {n.id: ENGINE_SM for n in gg.layers}
            model_events = []
            sm_models.append(gg)
        else:
            gg = with_precision(g, Precision.INT8)
            gg = emulate_lowering(gg, engine_id)
            gg = precision_fallback(gg, cat.engine(engine_id))
            assignment, model_fallbacks, model_events = _place_on_dla(gg, cat, engine_id)
            fallbacks.extend(model_fallbacks)
        models[name] = gg
        for lid, eng in assignment.items():
            assignments[(name, lid)] = eng
        events.extend(model_events)
        stage_costs[stage] = (
            _assigned_cost(cat, gg, assignment) + _events_cost(cat, model_events)
        )

    fd_g, fn_g = models[fd.name], models[fn.name]
    fd_order = _compute_order(fd_g)
    fn_order = _compute_order(fn_g)
    pipeline_events = [TransferEvent(
        direction=TransferDirection.HOST_TO_DEVICE,
        bytes=fd_g.layer(fd_g.input_id()).output_bytes(),
        boundary=(fd_g.input_id(), fd_order[0]),
    )]
    if det_engine != rec_engine:
        producer = fd_order[-1]
        pipeline_events.append(TransferEvent(
            direction=TransferDirection.DEVICE_TO_DEVICE,
            bytes=fd_g.layer(producer).output_bytes(),
            boundary=(producer, fn_order[0]),
        ))
    pipeline_events.append(TransferEvent(
        direction=TransferDirection.DEVICE_TO_HOST,
        bytes=fn_g.layer(fn_order[-1]).output_bytes(),
        boundary=(fn_order[-1], fn_g.output_id()),
    ))
    events.extend(pipeline_events)

    return AllocationPlan(
        scheme=scheme,
        models=models,
        layer_assignments=assignments,
        fallback_layers=tuple(fallbacks),
        transfer_events=tuple(events),
        stage_engines={"detect": det_engine, "recognize": rec_engine},
        stage_costs_s=stage_costs,
        stage_models={"detect": fd.name, "recognize": fn.name},
        sm_contention_lambda=_contention_lambda(cat, sm_models),
    )


def plan_layer_level(g: ModelGraph, cat: EngineCatalog,
                     balance_mode: str = "equal_busy") -> AllocationPlan:
    """Split one model between the GPU and a DLA at a layer boundary.

    The split point is the contiguous prefix or suffix whose DLA-eligible
    share of work best matches the balance solution; ties prefer fewer GPU
    islands, then the earlier split. Falls back to an all-GPU plan (with a
    notice) when no eligible layer exists or the split cannot beat it.
    """
    violations = validate(g)
    if violations:
        raise ConfigError("graph %s invalid: %s" % (g.name, violations[0]))

    gpu_graph = with_precision(g, Precision.FP16)
    c_gpu = model_cost(cat, gpu_graph, cat.engine(ENGINE_SM))

    lowered = emulate_lowering(with_precision(g, Precision.INT8), ENGINE_DLA0)
    lowered = precision_fallback(lowered, cat.engine(ENGINE_DLA0))
    dla_engine = cat.engine(ENGINE_DLA0)
    dla_cost_by_id = {}
    for node in lowered.layers:
        if node.kind in (LayerKind.INPUT, LayerKind.OUTPUT):
            continue
        if dla_support_reason(node, cat.dla_caps) is None:
            dla_cost_by_id[node.id] = layer_cost(cat, lowered, node.id, dla_engine)
    c_dla = sum(dla_cost_by_id.values())

    def all_gpu_plan(notes):
        assignment = {n.id: ENGINE_SM for n in gpu_graph.layers}
        events = (
            TransferEvent(
                direction=TransferDirection.HOST_TO_DEVICE,
                bytes=gpu_graph.layer(gpu_graph.input_id()).output_bytes(),
                boundary=(gpu_graph.input_id(), _compute_order(gpu_graph)[0]),
            ),
            TransferEvent(
                direction=TransferDirection.DEVICE_TO_HOST,
                bytes=gpu_graph.layer(_compute_order(gpu_graph)[-1]).output_bytes(),
                boundary=(_compute_order(gpu_graph)[-1], gpu_graph.output_id()),
            ),
        )
        return AllocationPlan(
            scheme=SCHEME_LAYER_BALANCED,
            models={g.name: gpu_graph},
            layer_assignments={(g.name, lid): eng for lid, eng in assignment.items()},
            fallback_layers=(),
            transfer_events=events,
            stage_engines={"model": ENGINE_SM},
            stage_costs_s={"model": c_gpu},
            stage_models={"model": g.name},
            sm_contention_lambda=_contention_lambda(cat, [gpu_graph]),
            notes=tuple(notes),
        )

    if c_dla <= 0.0:
        return all_gpu_plan(["no DLA-eligible layer; all-GPU fallback"])

    sol = solve_balance(BalanceProblem(c_gpu_s=c_gpu, c_dla_s=c_dla), mode=balance_mode)
    order = _compute_order(lowered)
    n = len(order)

    best = None
    for orientation in ("prefix", "suffix"):
        for k in range(n + 1):
            region = set(order[:k]) if orientation == "prefix" else set(order[n - k:])
            share = sum(dla_cost_by_id.get(lid, 0.0) for lid in region) / c_dla
            assignment = {}
            for lid in order:
                if lid in region and lid in dla_cost_by_id:
                    assignment[lid] = ENGINE_DLA0
                else:
                    assignment[lid] = ENGINE_SM
            islands = _interior_islands(order, assignment, {ENGINE_DLA0})
            key = (abs(share - sol.t_dla), len(islands), k, orientation)
            if best is None or key < best[0]:
                best = (key, orientation, k, assignment, islands)

    _, orientation, k, assignment, islands = best
    full_assignment = dict(assignment)
    full_assignment[lowered.input_id()] = ENGINE_SM
    full_assignment[lowered.output_id()] = ENGINE_SM
    fallbacks = []
    for lid in order:
        if assignment[lid] == ENGINE_SM and lid not in dla_cost_by_id:
            support = classify_dla_support(lowered.layer(lid), cat.dla_caps)
            if not support.supported:
                region = set(order[:k]) if orientation == "prefix" else set(order[len(order) - k:])
                if lid in region:
                    fallbacks.append((g.name, lid, support.reason))

    events = _island_events(lowered, order, assignment, {ENGINE_DLA0})
    gpu_busy = sum(
        layer_cost(cat, lowered, lid, cat.engine(ENGINE_SM))
        for lid in order if assignment[lid] == ENGINE_SM
    )
    dla_busy = sum(
        dla_cost_by_id[lid] for lid in order if assignment[lid] == ENGINE_DLA0
    )

    pipeline_events = [TransferEvent(
        direction=TransferDirection.HOST_TO_DEVICE,
        bytes=lowered.layer(lowered.input_id()).output_bytes(),
        boundary=(lowered.input_id(), order[0]),
    )]
    # One device handoff where the GPU segment meets the DLA region mid-chain.
    dla_positions = [i for i, lid in enumerate(order) if assignment[lid] == ENGINE_DLA0]
    if dla_positions:
        lo, hi = dla_positions[0], dla_positions[-1]
        if orientation == "suffix" and lo > 0:
            producer = order[lo - 1]
            pipeline_events.append(TransferEvent(
                direction=TransferDirection.DEVICE_TO_DEVICE,
                bytes=lowered.layer(producer).output_bytes(),
                boundary=(producer, order[lo]),
            ))
        if orientation == "prefix" and hi < n - 1:
            producer = order[hi]
            pipeline_events.append(TransferEvent(
                direction=TransferDirection.DEVICE_TO_DEVICE,
                bytes=lowered.layer(producer).output_bytes(),
                boundary=(producer, order[hi + 1]),
            ))
    pipeline_events.append(TransferEvent(
        direction=TransferDirection.DEVICE_TO_HOST,
        bytes=lowered.layer(order[-1]).output_bytes(),
        boundary=(order[-1], lowered.output_id()),
    ))

    stage_time = max(gpu_busy, dla_busy) + _events_cost(cat, events + pipeline_events)
    if stage_time > c_gpu:
        return all_gpu_plan([
            "split stage time %.6f s loses to all-GPU %.6f s; all-GPU fallback"
            % (stage_time, c_gpu)
        ])

    return AllocationPlan(
        scheme=SCHEME_LAYER_BALANCED,
        models={g.name: lowered},
        layer_assignments={(g.name, lid): eng for lid, eng in full_assignment.items()},
        fallback_layers=tuple(fallbacks),
        transfer_events=tuple(events) + tuple(pipeline_events),
        stage_engines={"model": ENGINE_SM},
        stage_costs_s={"model": stage_time},
        stage_models={"model": g.name},
        balance={g.name: sol},
        sm_contention_lambda=_contention_lambda(cat, [gpu_graph]),
    )


def plan_layer_balanced(fd: ModelGraph, fn: ModelGraph, cat: EngineCatalog,
                        balance_mode: str = "equal_busy") -> AllocationPlan:
    """Pipeline plan with each model split at the layer level."""
    fd_plan = plan_layer_level(fd, cat, balance_mode=balance_mode)
    fn_plan = plan_layer_level(fn, cat, balance_mode=balance_mode)
    models = {}
    models.update(fd_plan.models)
    models.update(fn_plan.models)
    assignments = {}
    assignments.update(fd_plan.layer_assignments)
    assignments.update(fn_plan.layer_assignments)
    balance = {}
    balance.update(fd_plan.balance)
    balance.update(fn_plan.balance)
    stage_costs = {
        "detect": fd_plan.stage_costs_s["model"],
        "recognize": fn_plan.stage_costs_s["model"],
    }
    sm_models = [models[name] for name in (fd.name, fn.name)]
    return AllocationPlan(
        scheme=SCHEME_LAYER_BALANCED,
        models=models,
        layer_assignments=assignments,
        fallback_layers=fd_plan.fallback_layers + fn_plan.fallback_layers,
        transfer_events=fd_plan.transfer_events + fn_plan.transfer_events,
        stage_engines={"detect": ENGINE_SM, "recognize": ENGINE_SM},
        stage_costs_s=stage_costs,
        stage_models={"detect": fd.name, "recognize": fn.name},
        balance=balance,
        sm_contention_lambda=_contention_lambda(cat, sm_models),
        notes=fd_plan.notes + fn_plan.notes,
    )


def transfer_cost(plan: AllocationPlan, cat: EngineCatalog) -> float:
    """Seconds of transfer work the plan implies, bandwidth plus overhead."""
    return _events_cost(cat, plan.transfer_events)


def serialize_plan(plan: AllocationPlan) -> str:
    doc = {
        "scheme": plan.scheme,
        "assignments": [
            {"model": m, "layer": lid, "engine": eng}
            for (m, lid), eng in sorted(plan.layer_assignments.items())
        ],
        "fallbacks": [
            {"model": m, "layer": lid, "reason": reason}
            for m, lid, reason in plan.fallback_layers
        ],
        "transfers": [
            {
                "direction": e.direction.value,
                "bytes": e.bytes,
                "producer": e.boundary[0],
                "consumer": e.boundary[1],
                "model": e.model,
            }
            for e in plan.transfer_events
        ],
        "stage_costs_ms": {k: v * 1e3 for k, v in sorted(plan.stage_costs_s.items())},
        "notes": list(plan.notes),
    }
    return json.dumps(doc, indent=2, sort_keys=False)


def default_pipeline_plan(scheme: str, cat: EngineCatalog) -> AllocationPlan:
    """Plan for a scheme name using the stock detect/recognize models."""
    fd = build_facedetect()
    fn = build_facenet()
    if scheme == SCHEME_LAYER_BALANCED:
        return plan_layer_balanced(fd, fn, cat)
    return plan_model_level(scheme, fd, fn, cat)
