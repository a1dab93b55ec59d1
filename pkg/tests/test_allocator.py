"""DLA eligibility, lowering emulation, plans, and transfer accounting."""
import dataclasses
import json

import pytest
from hypothesis import given, settings, strategies as st

import hetpipe.allocator as al
import hetpipe.engine_model as em
from hetpipe.errors import ConfigError
from hetpipe.model_graph import (
    LayerKind,
    LayerNode,
    ModelGraph,
    Precision,
    build_facedetect,
    build_facenet,
)


@pytest.fixture(scope="module")
def cat():
    return em.default_orin_catalog(cost_params=em.calibrate(em.default_measurements()))


def _node(i, kind, *, precision=Precision.FP16, kernel=None, channels=8,
          preds=(), succs=()):
    spatial = kind in (LayerKind.CONV, LayerKind.DECONV)
    k = kernel if kernel else ((3, 3) if spatial else None)
    if kind in (LayerKind.SHUFFLE, LayerKind.CONSTANT, LayerKind.INPUT,
                LayerKind.OUTPUT):
        macs = 0
    elif spatial:
        macs = k[0] * k[1] * channels * 4 * 4 * channels
    else:
        macs = 4 * 4 * channels
    return LayerNode(id=i, kind=kind, kernel=k,
                     stride=(1, 1) if spatial else None, in_channels=channels,
                     out_channels=channels, output_dims=(4, 4, channels),
                     precision=precision, macs=macs, preds=preds, succs=succs)


def chain_graph(body_kinds, channels=8, **node_kw):
    nodes = [_node(0, LayerKind.INPUT, channels=channels, succs=(1,))]
    for i, kind in enumerate(body_kinds, start=1):
        nodes.append(_node(i, kind, channels=channels,
                           preds=(i - 1,), succs=(i + 1,), **node_kw))
    n = len(nodes)
    nodes.append(_node(n, LayerKind.OUTPUT, channels=channels, preds=(n - 1,)))
    return ModelGraph(name="chain", layers=tuple(nodes), input_dims=(4, 4, channels))


class TestClassify:
    def test_shuffle_falls_back_on_kind(self, cat):
        n = _node(1, LayerKind.SHUFFLE)
        r = al.classify_dla_support(n, cat.dla_caps)
        assert not r.supported and r.reason == "kind"

    def test_supported_conv(self, cat):
        n = _node(1, LayerKind.CONV, kernel=(7, 7), channels=64)
        assert al.classify_dla_support(n, cat.dla_caps).supported

    def test_fp32_falls_back(self, cat):
        n = _node(1, LayerKind.CONV, precision=Precision.FP32)
        r = al.classify_dla_support(n, cat.dla_caps)
        assert not r.supported and r.reason == "precision"

    def test_kernel_range(self, cat):
        n = _node(1, LayerKind.CONV, kernel=(33, 33))
        assert al.classify_dla_support(n, cat.dla_caps).reason == "kernel"

    def test_channel_range(self, cat):
        n = _node(1, LayerKind.CONV, channels=9000)
        assert al.classify_dla_support(n, cat.dla_caps).reason == "channels"

    def test_rule_order_kind_first(self, cat):
        # a layer failing both kind and precision reports kind
        n = _node(1, LayerKind.POW, precision=Precision.FP32)
        assert al.classify_dla_support(n, cat.dla_caps).reason == "kind"


class TestLowering:
    def test_facedetect_identity(self, cat):
        fd = build_facedetect()
        assert al.emulate_lowering(fd, em.ENGINE_DLA0) == fd
        assert al.count_dla_unsupported(fd, cat.dla_caps) == {}

    def test_facenet_counts(self, cat):
        low = al.emulate_lowering(build_facenet(), em.ENGINE_DLA0)
        counts = al.count_dla_unsupported(low, cat.dla_caps)
        assert sum(counts.values()) == 63
        assert counts[LayerKind.SHUFFLE] == 28
        assert counts[LayerKind.CONSTANT] == 28

    def test_non_dla_target_identity(self):
        fn = build_facenet()
        assert al.emulate_lowering(fn, em.ENGINE_SM) == fn

    def test_idempotent(self):
        fn = build_facenet()
        once = al.emulate_lowering(fn, em.ENGINE_DLA0)
        assert al.emulate_lowering(once, em.ENGINE_DLA0) == once


class TestPrecisionFallback:
    def test_facedetect_int8_flips(self, cat):
        fd_int8 = dataclasses.replace(
            build_facedetect(),
            layers=tuple(dataclasses.replace(n, precision=Precision.INT8)
                         for n in build_facedetect().layers))
        adjusted = al.precision_fallback(fd_int8, cat.engine(em.ENGINE_DLA0))
        flipped = [n for n in adjusted.layers if n.precision is Precision.FP16]
        assert len(flipped) == 12

    def test_non_dla_unchanged(self, cat):
        fd = build_facedetect()
        assert al.precision_fallback(fd, cat.engine(em.ENGINE_SM)) == fd

    def test_all_fp16_unchanged(self, cat):
        fd = build_facedetect()
        assert al.precision_fallback(fd, cat.engine(em.ENGINE_DLA0)) == fd

    def test_topology_preserved(self, cat):
        fd_int8 = dataclasses.replace(
            build_facedetect(),
            layers=tuple(dataclasses.replace(n, precision=Precision.INT8)
                         for n in build_facedetect().layers))
        adjusted = al.precision_fallback(fd_int8, cat.engine(em.ENGINE_DLA0))
        assert [(n.id, n.preds, n.succs) for n in adjusted.layers] == \
               [(n.id, n.preds, n.succs) for n in fd_int8.layers]


class TestModelLevelPlans:
    def test_every_layer_assigned_once(self, cat):
        fd, fn = build_facedetect(), build_facenet()
        for scheme in al.SCHEMES:
            plan = al.plan_model_level(scheme, fd, fn, cat)
            for model, g in plan.models.items():
                ids = {n.id for n in g.layers}
                assigned = {lid for (m, lid) in plan.layer_assignments if m == model}
                assert assigned == ids, (scheme, model)

    def test_dla_assignments_supported(self, cat):
        fd, fn = build_facedetect(), build_facenet()
        for scheme in al.SCHEMES:
            plan = al.plan_model_level(scheme, fd, fn, cat)
            for (model, lid), engine in plan.layer_assignments.items():
                if engine in (em.ENGINE_DLA0, em.ENGINE_DLA1):
                    node = plan.models[model].layer(lid)
                    assert al.classify_dla_support(node, cat.dla_caps).supported

    def test_fd_dla_fn_gpu_placement(self, cat):
        # executable FaceDetect layers live on DLA0; graph endpoints stay host-side
        plan = al.plan_model_level("fd_dla_fn_gpu", build_facedetect(),
                                   build_facenet(), cat)
        fd = plan.models["facedetect"]
        fd_engines = {e for (m, lid), e in plan.layer_assignments.items()
                      if m == "facedetect"
                      and fd.layer(lid).kind not in (LayerKind.INPUT, LayerKind.OUTPUT)}
        assert fd_engines == {em.ENGINE_DLA0}
        fn_engines = {e for (m, _), e in plan.layer_assignments.items()
                      if m == "facenet"}
        assert fn_engines == {em.ENGINE_SM}

    def test_fdfn_dla_fallback_count(self, cat):
        plan = al.plan_model_level("fdfn_dla", build_facedetect(),
                                   build_facenet(), cat)
        fn_fallbacks = [f for f in plan.fallback_layers if f[0] == "facenet"]
        assert len(fn_fallbacks) == 63

    def test_all_gpu_transfers_host_only(self, cat):
        plan = al.plan_model_level("fdfn_gpu", build_facedetect(),
                                   build_facenet(), cat)
        dirs = {e.direction for e in plan.transfer_events}
        assert dirs <= {al.TransferDirection.HOST_TO_DEVICE,
                        al.TransferDirection.DEVICE_TO_HOST}
        assert not plan.dtod_events()

    def test_invalid_scheme(self, cat):
        with pytest.raises(ConfigError):
            al.plan_model_level("nope", build_facedetect(), build_facenet(), cat)

    def test_transfer_bytes_match_producer(self, cat):
        plan = al.plan_model_level("fdfn_dla", build_facedetect(),
                                   build_facenet(), cat)
        checked = 0
        for ev in plan.dtod_events():
            if ev.model not in plan.models:
                continue  # detect->recognize junction, not a layer boundary
            producer_id = ev.boundary[0]
            node = plan.models[ev.model].layer(producer_id)
            assert ev.bytes == node.output_bytes()
            checked += 1
        assert checked > 0


def _equal_cost_catalog(cat, name="chain"):
    """Scales making the model cost identical all-GPU (FP16) and all-DLA
    (INT8 after lowering), with transfer overheads zeroed."""
    sm_fp16 = cat.engine(em.ENGINE_SM).compute_rate[Precision.FP16]
    dla_int8 = cat.engine(em.ENGINE_DLA0).compute_rate[Precision.INT8]
    scale = dict(cat.cost_params.scale)
    scale[(name, em.EngineClass.SIMT_CLUSTER)] = 1.0
    scale[(name, em.EngineClass.DEEP_LEARNING_ACCEL)] = dla_int8 / sm_fp16
    params = dataclasses.replace(cat.cost_params, scale=scale,
                                 dtod_transfer_overhead_s=0.0,
                                 zero_mac_overhead_s=0.0)
    return cat.with_cost_params(params)


class TestLayerLevelPlans:
    def test_uniform_chain_split(self, cat):
        # Deconv keeps INT8 on the DLA for every layer, so costs stay uniform;
        # heavy enough that boundary transfers are negligible.
        g = chain_graph([LayerKind.DECONV] * 10, channels=64, kernel=(7, 7))
        c = _equal_cost_catalog(cat)
        plan = al.plan_layer_level(g, c)
        assigned = plan.assignments_for("chain")
        on_dla = {lid for lid, e in assigned.items()
                  if e in (em.ENGINE_DLA0, em.ENGINE_DLA1)}
        on_gpu = [lid for lid, e in assigned.items()
                  if e == em.ENGINE_SM
                  and plan.models["chain"].layer(lid).kind is LayerKind.DECONV]
        assert len(on_dla) == 5 and len(on_gpu) == 5
        crossings = [ev for ev in plan.transfer_events
                     if (ev.boundary[0] in on_dla) != (ev.boundary[1] in on_dla)]
        assert len(crossings) == 2

    def test_one_island(self, cat):
        # Balance target 1/3 of the supported work (c_dla = 2 c_gpu) is hit
        # exactly only by a prefix that spans the unsupported Pow layer, so
        # the Pow becomes a GPU island inside the DLA region.
        ch = 1024
        spec = [
            (LayerKind.DECONV, (1, 1)),
            (LayerKind.POW, None),
            (LayerKind.DECONV, (1, 1)),
            (LayerKind.DECONV, (1, 1)),
            (LayerKind.DECONV, (1, 2)),
            (LayerKind.DECONV, (2, 2)),
        ]
        nodes = [_node(0, LayerKind.INPUT, channels=ch, succs=(1,))]
        for i, (kind, k) in enumerate(spec, start=1):
            nodes.append(_node(i, kind, channels=ch, kernel=k,
                               preds=(i - 1,), succs=(i + 1,)))
        n = len(nodes)
        nodes.append(_node(n, LayerKind.OUTPUT, channels=ch, preds=(n - 1,)))
        g = ModelGraph(name="chain", layers=tuple(nodes), input_dims=(4, 4, ch))

        sm_fp16 = cat.engine(em.ENGINE_SM).compute_rate[Precision.FP16]
        dla_int8 = cat.engine(em.ENGINE_DLA0).compute_rate[Precision.INT8]
        scale = dict(cat.cost_params.scale)
        scale[("chain", em.EngineClass.SIMT_CLUSTER)] = 1.0
        scale[("chain", em.EngineClass.DEEP_LEARNING_ACCEL)] = 2 * dla_int8 / sm_fp16
        params = dataclasses.replace(cat.cost_params, scale=scale,
                                     dtod_transfer_overhead_s=0.0,
                                     zero_mac_overhead_s=0.0)
        c = cat.with_cost_params(params)

        plan = al.plan_layer_level(g, c)
        assigned = plan.assignments_for("chain")
        assert assigned[2] == em.ENGINE_SM
        assert assigned[1] in (em.ENGINE_DLA0, em.ENGINE_DLA1)
        assert assigned[3] in (em.ENGINE_DLA0, em.ENGINE_DLA1)
        island_pairs = [ev for ev in plan.dtod_events() if 2 in ev.boundary]
        assert len(island_pairs) == 2
        assert ("chain", 2, "kind") in plan.fallback_layers

    def test_no_supported_layer_degenerates(self, cat):
        g = chain_graph([LayerKind.POW] * 4)
        plan = al.plan_layer_level(g, cat)
        body_engines = {e for (m, lid), e in plan.layer_assignments.items()}
        assert body_engines == {em.ENGINE_SM}
        assert any("all-GPU" in n or "all_gpu" in n for n in plan.notes)

    def test_split_never_loses_to_all_gpu(self, cat):
        g = chain_graph([LayerKind.CONV] * 12, channels=64)
        plan = al.plan_layer_level(g, cat)
        sm = cat.engine(em.ENGINE_SM)
        all_gpu_s = em.model_cost(cat, g, sm)
        if not any("all" in n.lower() for n in plan.notes):
            assert plan.stage_costs_s["model"] <= all_gpu_s * (1 + 1e-9)

    def test_balanced_pipeline_has_detect_and_recognize(self, cat):
        plan = al.plan_layer_balanced(build_facedetect(), build_facenet(), cat)
        assert plan.scheme == "layer_balanced"
        assert set(plan.stage_costs_s) >= {"detect", "recognize"}
        assert plan.balance is not None


class TestTransferCost:
    def test_empty(self, cat):
        plan = al.plan_model_level("fdfn_gpu", build_facedetect(),
                                   build_facenet(), cat)
        no_ev = dataclasses.replace(plan, transfer_events=())
        assert al.transfer_cost(no_ev, cat) == 0.0

    def test_hand_arithmetic(self, cat):
        # 4 transfers of 301,056 bytes at 204.08 GB/s, zero fixed overhead
        params = dataclasses.replace(cat.cost_params, dtod_transfer_overhead_s=0.0)
        c = cat.with_cost_params(params)
        base = al.plan_model_level("fdfn_gpu", build_facedetect(), build_facenet(), c)
        ev = al.TransferEvent(direction=al.TransferDirection.DEVICE_TO_DEVICE,
                              bytes=301056, boundary=(0, 1), model="facedetect")
        plan = dataclasses.replace(base, transfer_events=(ev,) * 4)
        assert al.transfer_cost(plan, c) == pytest.approx(4 * 301056 / 204.08e9)
        assert al.transfer_cost(plan, c) == pytest.approx(5.90e-6, rel=1e-3)

    def test_linearity(self, cat):
        params = dataclasses.replace(cat.cost_params, dtod_transfer_overhead_s=0.0)
        c = cat.with_cost_params(params)
        base = al.plan_model_level("fdfn_gpu", build_facedetect(), build_facenet(), c)
        ev = al.TransferEvent(direction=al.TransferDirection.DEVICE_TO_DEVICE,
                              bytes=1000, boundary=(0, 1), model="facedetect")
        one = dataclasses.replace(base, transfer_events=(ev,))
        two = dataclasses.replace(base, transfer_events=(ev, ev))
        assert al.transfer_cost(two, c) == pytest.approx(2 * al.transfer_cost(one, c))


def brute_force_islands(order, assignment, dla_ids):
    """Count maximal GPU runs strictly inside the DLA-resident span."""
    flags = [assignment[lid] not in dla_ids for lid in order]
    if all(flags):
        return 0
    first = flags.index(False)
    last = len(flags) - 1 - flags[::-1].index(False)
    islands = 0
    inside = False
    for f in flags[first:last + 1]:
        if f and not inside:
            islands += 1
        inside = f
    return islands


class TestIslandRule:
    @settings(max_examples=80, deadline=None)
    @given(st.lists(st.booleans(), min_size=1, max_size=24), st.booleans())
    def test_matches_brute_force(self, cat, dla_flags, edge_gpu):
        body = [LayerKind.CONV if f else LayerKind.POW for f in dla_flags]
        if edge_gpu:
            body = [LayerKind.POW] + body + [LayerKind.POW]
        g = chain_graph(body)
        assignment = {}
        for n in g.layers:
            if n.kind is LayerKind.CONV:
                assignment[n.id] = em.ENGINE_DLA0
            else:
                assignment[n.id] = em.ENGINE_SM
        events = al.island_events(g, assignment)
        order = [n.id for n in g.layers]
        want = brute_force_islands(order, assignment, {em.ENGINE_DLA0, em.ENGINE_DLA1})
        dtod = [e for e in events if e.direction is al.TransferDirection.DEVICE_TO_DEVICE]
        assert len(dtod) == 2 * want


class TestSerializePlan:
    def test_round_trip_document(self, cat):
        plan = al.plan_model_level("fd_dla_fn_gpu", build_facedetect(),
                                   build_facenet(), cat)
        doc = json.loads(al.serialize_plan(plan))
        assert doc["scheme"] == "fd_dla_fn_gpu"
        assert {a["model"] for a in doc["assignments"]} == {"facedetect", "facenet"}
        assert set(doc) >= {"scheme", "assignments", "fallbacks", "transfers",
                            "stage_costs_ms"}

    def test_stable_output(self, cat):
        plan = al.plan_model_level("fdfn_dla", build_facedetect(),
                                   build_facenet(), cat)
        assert al.serialize_plan(plan) == al.serialize_plan(plan)
