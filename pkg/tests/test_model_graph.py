"""Graph construction, validation, traversal, and working-set accounting."""
import dataclasses

import pytest

from hetpipe.model_graph import (
    LayerKind,
    LayerNode,
    ModelGraph,
    Precision,
    ZERO_MAC_KINDS,
    build_facedetect,
    build_facenet,
    layer_working_set,
    toposort,
    validate,
)


@pytest.fixture(scope="module")
def fd():
    return build_facedetect()


@pytest.fixture(scope="module")
def fn():
    return build_facenet()


def _by_kind(g, kind):
    return [n for n in g.layers if n.kind is kind]


class TestFaceDetect:
    def test_validates(self, fd):
        assert validate(fd) == []

    def test_input_dims(self, fd):
        assert fd.input_dims == (224, 224, 3)

    def test_first_conv_shape(self, fd):
        convs = _by_kind(fd, LayerKind.CONV)
        first = convs[0]
        assert first.kernel == (7, 7)
        assert first.stride == (2, 2)
        assert first.output_dims == (112, 112, 64)

    def test_avgpool_output(self, fd):
        pools = [n for n in _by_kind(fd, LayerKind.POOLING) if n.pool_mode == "avg"]
        assert pools and pools[-1].output_dims == (1, 1, 512)

    def test_channel_progression(self, fd):
        # residual stages run 64 -> 128 -> 256 -> 512
        convs = _by_kind(fd, LayerKind.CONV)
        widths = sorted({n.out_channels for n in convs})
        assert widths == [64, 128, 256, 512]

    def test_weight_layer_count(self, fd):
        # conv1 + 4 blocks x 4 convs + fully connected = 18
        weighted = [n for n in fd.layers
                    if n.kind in (LayerKind.CONV, LayerKind.FULLY_CONNECTED)]
        assert len(weighted) == 18

    def test_no_shuffle(self, fd):
        assert _by_kind(fd, LayerKind.SHUFFLE) == []

    def test_all_fp16(self, fd):
        assert all(n.precision is Precision.FP16 for n in fd.layers)


class TestFaceNet:
    def test_validates(self, fn):
        assert validate(fn) == []

    def test_embedding(self, fn):
        assert fn.embedding_size == 128
        out = fn.layers[-1]
        assert out.kind is LayerKind.OUTPUT
        assert out.output_dims == (1, 1, 128)

    def test_tail_is_fc_then_l2norm(self, fn):
        kinds = [n.kind for n in fn.layers]
        i_fc = max(i for i, k in enumerate(kinds) if k is LayerKind.FULLY_CONNECTED)
        assert fn.layers[i_fc].output_dims == (1, 1, 128)
        # the norm tail (pow feeding the l2 reduction) sits between fc and output
        i_norm = kinds.index(LayerKind.L2_NORM)
        assert i_fc < i_norm < len(kinds) - 1
        assert kinds[-1] is LayerKind.OUTPUT

    def test_inception_3c_dims(self, fn):
        assert any(n.output_dims == (14, 14, 640) for n in fn.layers)

    def test_unsupported_seed_kinds_present(self, fn):
        assert any(n.kind is LayerKind.POOLING and n.pool_mode == "global_avg"
                   for n in fn.layers)
        assert any(n.kind is LayerKind.POW for n in fn.layers)

    def test_no_shuffle_before_lowering(self, fn):
        assert _by_kind(fn, LayerKind.SHUFFLE) == []


class TestValidate:
    def test_cycle_reported(self, fd):
        layers = list(fd.layers)
        a, b = layers[3], layers[4]
        layers[3] = dataclasses.replace(a, preds=a.preds + (b.id,))
        g = ModelGraph(name="cyclic", layers=tuple(layers), input_dims=fd.input_dims)
        assert any("cycle" in v for v in validate(g))

    def test_zero_mac_conv_reported(self, fd):
        layers = [dataclasses.replace(n, macs=0) if n.kind is LayerKind.CONV else n
                  for n in fd.layers]
        g = ModelGraph(name="zeromac", layers=tuple(layers), input_dims=fd.input_dims)
        assert any("macs" in v for v in validate(g))

    def test_all_violations_returned(self, fd):
        layers = list(fd.layers)
        convs = [i for i, n in enumerate(layers) if n.kind is LayerKind.CONV]
        for i in convs[:2]:
            layers[i] = dataclasses.replace(layers[i], macs=0)
        g = ModelGraph(name="multi", layers=tuple(layers), input_dims=fd.input_dims)
        assert len([v for v in validate(g) if "macs" in v]) == 2

    def test_zero_mac_kinds_exact(self, fd, fn):
        for g in (fd, fn):
            for n in g.layers:
                assert (n.macs == 0) == (n.kind in ZERO_MAC_KINDS), n.kind


class TestToposort:
    def test_idempotent(self, fn):
        once = toposort(fn)
        twice = toposort(once)
        assert [n.id for n in once.layers] == [n.id for n in twice.layers]
        assert validate(once) == []

    def test_preds_precede(self, fn):
        pos = {n.id: i for i, n in enumerate(fn.layers)}
        for n in fn.layers:
            assert all(pos[p] < pos[n.id] for p in n.preds)


class TestMacs:
    def test_dense_mac_arithmetic(self, fd, fn):
        # spatial layers follow kh*kw*cin*hout*wout*cout exactly
        for g in (fd, fn):
            by_id = {n.id: n for n in g.layers}
            for n in g.layers:
                if n.kind not in (LayerKind.CONV, LayerKind.DECONV,
                                  LayerKind.FULLY_CONNECTED) or n.kernel is None:
                    continue
                h, w, c = n.output_dims
                kh, kw = n.kernel
                assert n.macs == kh * kw * n.in_channels * h * w * c, n.id
                assert by_id[n.preds[0]].output_dims[2] == n.in_channels


class TestWorkingSet:
    def test_input_term_arithmetic(self, fd):
        inp = fd.layers[0]
        assert inp.kind is LayerKind.INPUT
        ws = layer_working_set(fd, inp.id)
        # no params, no input tensor: output 224*224*3 at 2 bytes
        assert ws == 224 * 224 * 3 * 2

    def test_embedding_output_term(self, fn):
        i_fc = max(i for i, n in enumerate(fn.layers)
                   if n.kind is LayerKind.FULLY_CONNECTED)
        node = fn.layers[i_fc]
        prev = {n.id: n for n in fn.layers}[node.preds[0]]
        ph, pw, pc = prev.output_dims
        want = (ph * pw * pc) * 2 + 128 * 2 + node.in_channels * 128 * 2
        assert layer_working_set(fn, node.id) == want

    def test_unknown_id(self, fd):
        with pytest.raises(KeyError):
            layer_working_set(fd, 10_000)

    def test_brute_force_tally(self, fd):
        by_id = {n.id: n for n in fd.layers}

        def params(n):
            if n.kind in (LayerKind.CONV, LayerKind.DECONV):
                return n.kernel[0] * n.kernel[1] * n.in_channels * n.out_channels
            if n.kind is LayerKind.FULLY_CONNECTED:
                return n.in_channels * n.out_channels
            if n.kind is LayerKind.BATCH_NORM:
                return 2 * n.out_channels
            return 0

        total = 0
        for n in fd.layers:
            h, w, c = n.output_dims
            in_elems = sum(
                by_id[p].output_dims[0] * by_id[p].output_dims[1] * by_id[p].output_dims[2]
                for p in n.preds)
            total += (h * w * c + in_elems + params(n)) * 2
        assert total == sum(layer_working_set(fd, n.id) for n in fd.layers)
