"""Engine catalog, cost model, balance solver, power model, calibration."""
import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

import hetpipe.engine_model as em
from hetpipe.errors import CalibrationError, CapabilityError
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
    return em.default_orin_catalog()


@pytest.fixture(scope="module")
def calibrated():
    params = em.calibrate(em.default_measurements())
    return em.default_orin_catalog(cost_params=params)


class TestCatalog:
    def test_engine_census(self, cat):
        by_class = {}
        for e in cat.engines:
            by_class.setdefault(e.klass, []).append(e.id)
        assert len(by_class[em.EngineClass.DEEP_LEARNING_ACCEL]) == 2
        assert len(by_class[em.EngineClass.SIMT_CLUSTER]) == 1
        assert len(by_class[em.EngineClass.VISION_ACCEL]) == 1
        assert len(by_class[em.EngineClass.VIDEO_DECODE]) == 1
        assert len(by_class[em.EngineClass.VIDEO_ENCODE]) == 1

    def test_datasheet_figures(self, cat):
        assert cat.memory.dram_bandwidth_bytes_per_s == 204.08e9
        sm = cat.engine(em.ENGINE_SM)
        assert sm.units == 16 and sm.lanes_per_unit == 128
        dla = cat.engine(em.ENGINE_DLA0)
        assert dla.compute_rate[Precision.INT8] == 52.5e12
        assert dla.local_buffer_bytes == 2 * 2**20
        assert cat.engine(em.ENGINE_NVDEC).stream_capacity["1080p"] == 24
        assert cat.engine(em.ENGINE_NVDEC).stream_capacity["2160p"] == 6

    def test_memory_ordering(self, cat):
        m = cat.memory
        assert 0 < m.l1_bytes_per_sm < m.l2_bytes < m.dram_bytes
        assert m.l2_bytes == 4 * 2**20

    def test_dla_rejects_fp32(self, cat):
        dla = cat.engine(em.ENGINE_DLA0)
        assert Precision.FP32 not in dla.compute_rate
        with pytest.raises(CapabilityError):
            dla.rate_for(Precision.FP32)

    def test_dla_perf_per_watt(self, cat):
        sm = cat.engine(em.ENGINE_SM)
        dla = cat.engine(em.ENGINE_DLA0)
        sm_ppw = sm.compute_rate[Precision.INT8] / sm.active_power_mw
        dla_ppw = dla.compute_rate[Precision.INT8] / dla.active_power_mw
        assert dla_ppw >= 2.0 * sm_ppw

    def test_unsupported_dla_kinds(self, cat):
        for kind in (LayerKind.SHUFFLE, LayerKind.CONSTANT, LayerKind.POW,
                     LayerKind.L2_NORM):
            assert kind not in cat.dla_caps.supported_kinds
        assert cat.dla_caps.kernel_min == 1 and cat.dla_caps.kernel_max == 32
        assert cat.dla_caps.channels_min == 1 and cat.dla_caps.channels_max == 8192


def _tiny_graph(macs, kind=LayerKind.CONV, precision=Precision.FP16):
    kernel = (3, 3) if kind in (LayerKind.CONV, LayerKind.DECONV) else None
    stride = (1, 1) if kernel else None
    body = LayerNode(id=1, kind=kind, kernel=kernel, stride=stride,
                     in_channels=1, out_channels=1, output_dims=(1, 1, 1),
                     precision=precision, macs=macs, preds=(0,), succs=(2,))
    return ModelGraph(name="tiny", layers=(
        LayerNode(id=0, kind=LayerKind.INPUT, kernel=None, stride=None,
                  in_channels=1, out_channels=1, output_dims=(1, 1, 1),
                  precision=precision, macs=0, preds=(), succs=(1,)),
        body,
        LayerNode(id=2, kind=LayerKind.OUTPUT, kernel=None, stride=None,
                  in_channels=1, out_channels=1, output_dims=(1, 1, 1),
                  precision=precision, macs=0, preds=(1,), succs=()),
    ), input_dims=(1, 1, 1))


class TestLayerCost:
    def test_rate_definition(self, cat):
        # macs equal to one second of DLA INT8 throughput at unit scale
        g = _tiny_graph(int(52.5e12), precision=Precision.INT8)
        params = dataclasses.replace(cat.cost_params, zero_mac_overhead_s=0.0)
        c = cat.with_cost_params(params)
        assert em.layer_cost(c, g, 1, c.engine(em.ENGINE_DLA0)) == pytest.approx(1.0)

    def test_zero_mac_overhead(self, cat):
        g = _tiny_graph(0, kind=LayerKind.CONSTANT)
        sm = cat.engine(em.ENGINE_SM)
        assert em.layer_cost(cat, g, 1, sm) == cat.cost_params.zero_mac_overhead_s

    def test_fp32_on_dla_rejected(self, cat):
        g = _tiny_graph(1000, precision=Precision.FP32)
        with pytest.raises(CapabilityError):
            em.layer_cost(cat, g, 1, cat.engine(em.ENGINE_DLA0))

    def test_deterministic(self, cat):
        g = build_facedetect()
        sm = cat.engine(em.ENGINE_SM)
        costs = {em.layer_cost(cat, g, n.id, sm) for n in g.layers for _ in range(3)}
        assert len(costs) == len({n.id for n in g.layers}) or len(costs) <= len(g.layers)


class TestModelCost:
    def test_additive(self, cat):
        g = build_facenet()
        sm = cat.engine(em.ENGINE_SM)
        assert em.model_cost(cat, g, sm) == pytest.approx(
            sum(em.layer_cost(cat, g, n.id, sm) for n in g.layers), rel=1e-12)

    def test_degenerate_graph(self, cat):
        g = ModelGraph(name="empty", layers=(
            LayerNode(id=0, kind=LayerKind.INPUT, kernel=None, stride=None,
                      in_channels=1, out_channels=1, output_dims=(1, 1, 1),
                      precision=Precision.FP16, macs=0, preds=(), succs=(1,)),
            LayerNode(id=1, kind=LayerKind.OUTPUT, kernel=None, stride=None,
                      in_channels=1, out_channels=1, output_dims=(1, 1, 1),
                      precision=Precision.FP16, macs=0, preds=(0,), succs=()),
        ), input_dims=(1, 1, 1))
        assert em.model_cost(cat, g, cat.engine(em.ENGINE_SM)) == pytest.approx(
            2 * cat.cost_params.zero_mac_overhead_s)


class TestSolveBalance:
    def test_symmetric(self):
        s = em.solve_balance(em.BalanceProblem(0.010, 0.010))
        assert s.t_gpu == pytest.approx(0.5)
        assert s.t_dla == pytest.approx(0.5)
        assert s.stage_time_s == pytest.approx(0.005)

    def test_asymmetric(self):
        s = em.solve_balance(em.BalanceProblem(0.010, 0.030))
        assert s.t_gpu == pytest.approx(0.75)
        assert s.t_dla == pytest.approx(0.25)
        assert s.stage_time_s == pytest.approx(0.0075)

    def test_limit_case(self):
        s = em.solve_balance(em.BalanceProblem(0.010, 1e9))
        assert s.t_gpu > 0.999999

    def test_fraction_sum_exact(self):
        s = em.solve_balance(em.BalanceProblem(0.0123, 0.0456))
        assert s.t_gpu + s.t_dla == 1.0

    def test_equal_busy_time(self):
        s = em.solve_balance(em.BalanceProblem(0.010, 0.030))
        assert s.t_gpu * 0.010 == pytest.approx(s.t_dla * 0.030, rel=1e-9)

    def test_literal_mode(self):
        s = em.solve_balance(em.BalanceProblem(0.010, 0.030), mode="literal")
        assert s.t_gpu == pytest.approx(0.25)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            em.solve_balance(em.BalanceProblem(0.0, 0.030))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-4, 1.0), st.floats(1e-4, 1.0))
    def test_optimal_vs_sweep(self, c_gpu, c_dla):
        s = em.solve_balance(em.BalanceProblem(c_gpu, c_dla))
        best = min(max(t * 1e-4 * c_gpu, (1 - t * 1e-4) * c_dla)
                   for t in range(10001))
        assert s.stage_time_s <= best * (1 + 1e-4)


class TestPowerDraw:
    def test_idle_boundary(self, cat):
        sm = cat.engine(em.ENGINE_SM)
        assert em.power_draw(cat, sm, 0.0) == sm.idle_power_mw
        assert em.power_draw(cat, sm, 1.0) == pytest.approx(sm.active_power_mw)

    def test_out_of_range(self, cat):
        with pytest.raises(ValueError):
            em.power_draw(cat, cat.engine(em.ENGINE_SM), 1.5)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1))
    def test_monotone(self, cat, u1, u2):
        sm = cat.engine(em.ENGINE_SM)
        lo, hi = sorted((u1, u2))
        assert em.power_draw(cat, sm, lo) <= em.power_draw(cat, sm, hi)


class TestCalibrate:
    def test_reproduces_stage_averages(self, calibrated):
        # predicted stage average = fitted service latency, plus the
        # preprocess time folded into the measured detect column
        params = calibrated.cost_params
        for (scheme, stage), measured_s in params.measured_stage_s.items():
            predicted = params.stage_latency_s[(scheme, stage)]
            if stage == "detect":
                predicted += params.preprocess_s
            assert predicted == pytest.approx(measured_s, rel=1e-6), (scheme, stage)

    def test_detect_cost_matches_table(self, calibrated):
        fd = build_facedetect()
        sm = calibrated.engine(em.ENGINE_SM)
        assert em.model_cost(calibrated, fd, sm) == pytest.approx(8.8e-3, rel=1e-6)

    def test_recognize_cost_matches_table(self, calibrated):
        # scheme-1 recognize average at the mean face count
        params = calibrated.cost_params
        per_face = em.recognize_per_face_s(params, "fdfn_gpu")
        total = params.recognize_overhead_s + params.faces_mean * per_face
        assert total == pytest.approx(19.7e-3, rel=1e-6)

    def test_fixed_point(self, calibrated):
        # feed the fit's own predictions back in; nothing may change
        params = calibrated.cost_params
        predictions = {}
        for (scheme, stage), lat_s in params.stage_latency_s.items():
            if stage == "preprocess":
                continue
            ms = lat_s * 1e3
            if stage == "detect":
                ms += params.preprocess_s * 1e3
            predictions[(scheme, stage)] = ms
        again = em.calibrate(predictions)
        for key, scale in params.scale.items():
            assert again.scale[key] == pytest.approx(scale, rel=1e-9)

    def test_missing_scheme_rows(self):
        table = {("fdfn_gpu", "decoder"): 9.9}
        with pytest.raises(CalibrationError):
            em.calibrate(table)

    def test_nonpositive_measurement(self):
        table = dict(em.default_measurements())
        table[("fdfn_gpu", "detect")] = 0.0
        with pytest.raises(CalibrationError):
            em.calibrate(table)

    def test_decoder_bases_ordered(self, calibrated):
        for scheme, bases in calibrated.cost_params.decoder_bases_s.items():
            i, p, b = bases
            assert i <= p < b, scheme


class TestMeasurementTable:
    def test_header_required(self):
        with pytest.raises(CalibrationError):
            em.parse_measurements("nope,nope,nope\nfdfn_gpu,decoder,9.9\n")

    def test_duplicate_row(self):
        text = "scheme,stage,avg_ms\nfdfn_gpu,decoder,9.9\nfdfn_gpu,decoder,9.9\n"
        with pytest.raises(CalibrationError, match="duplicate"):
            em.parse_measurements(text)

    def test_unknown_stage(self):
        with pytest.raises(CalibrationError):
            em.parse_measurements("scheme,stage,avg_ms\nfdfn_gpu,warp,9.9\n")

    def test_default_matches_shipped_file(self):
        assert em.load_measurements() == em.default_measurements()
