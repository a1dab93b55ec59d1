"""CNN computation-graph representation and the two built-in face models.

Graphs here carry only what a cost model needs: layer kinds, kernel shapes,
channel counts, tensor dims, precision and MAC counts. No weights, no tensor
math. All values are immutable after construction so graphs can be shared
freely across concurrent simulation runs.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

from .errors import GraphParseError, ValidationError


class LayerKind(str, Enum):
    CONV = "Conv"
    DECONV = "Deconv"
    FULLY_CONNECTED = "FullyConnected"
    ACTIVATION = "Activation"
    POOLING = "Pooling"
    BATCH_NORM = "BatchNorm"
    SHUFFLE = "Shuffle"
    CONSTANT = "Constant"
    POW = "Pow"
    L2_NORM = "L2Norm"
    CONCAT = "Concat"
    INPUT = "Input"
    OUTPUT = "Output"


class Precision(str, Enum):
    FP32 = "FP32"
    FP16 = "FP16"
    INT8 = "INT8"


PRECISION_BYTES = {Precision.FP32: 4, Precision.FP16: 2, Precision.INT8: 1}

POOL_MODES = ("max", "avg", "global_avg")

# Kinds that perform no multiply-accumulates at all. Every other kind gets a
# nonzero compute weight (element count for the non-weighted ones).
ZERO_MAC_KINDS = frozenset(
    {LayerKind.SHUFFLE, LayerKind.CONSTANT, LayerKind.INPUT, LayerKind.OUTPUT}
)

# Kinds whose output dims must follow kernel/stride arithmetic.
SPATIAL_KINDS = frozenset(
    {LayerKind.CONV, LayerKind.DECONV, LayerKind.FULLY_CONNECTED}
)


@dataclass(frozen=True)
class LayerNode:
    id: int
    kind: LayerKind
    kernel: Optional[tuple[int, int]]
    stride: Optional[tuple[int, int]]
    in_channels: int
    out_channels: int
    output_dims: tuple[int, int, int]  # (height, width, channels)
    precision: Precision
    macs: int
    preds: tuple[int, ...]
    succs: tuple[int, ...]
    pool_mode: Optional[str] = None  # only for kind == POOLING

    def output_elems(self) -> int:
        h, w, c = self.output_dims
        return h * w * c

    def output_bytes(self) -> int:
        return self.output_elems() * PRECISION_BYTES[self.precision]

    def param_elems(self) -> int:
        if self.kind in (LayerKind.CONV, LayerKind.DECONV):
            kh, kw = self.kernel
            return kh * kw * self.in_channels * self.out_channels
        if self.kind == LayerKind.FULLY_CONNECTED:
            return self.in_channels * self.out_channels
        if self.kind == LayerKind.BATCH_NORM:
            return 2 * self.out_channels
        return 0


@dataclass(frozen=True)
class ModelGraph:
    name: str
    layers: tuple[LayerNode, ...]
    input_dims: tuple[int, int, int]
    embedding_size: Optional[int] = None

    def layer(self, layer_id: int) -> LayerNode:
        for node in self.layers:
            if node.id == layer_id:
                return node
        raise KeyError(f"unknown layer id {layer_id} in graph '{self.name}'")

    def layers_of_kind(self, kind: LayerKind) -> list[LayerNode]:
        return [n for n in self.layers if n.kind == kind]

    def input_id(self) -> int:
        for node in self.layers:
            if node.kind == LayerKind.INPUT:
                return node.id
        raise KeyError(f"graph '{self.name}' has no Input node")

    def output_id(self) -> int:
        for node in self.layers:
            if node.kind == LayerKind.OUTPUT:
                return node.id
        raise KeyError(f"graph '{self.name}' has no Output node")

    def rebuild(self, nodes) -> "ModelGraph":
        """Graph from patched nodes; successor lists and MACs recomputed."""
        succs: dict[int, list[int]] = {n.id: [] for n in nodes}
        for n in nodes:
            for p in n.preds:
                if p in succs:
                    succs[p].append(n.id)
        layers = tuple(
            replace(
                n,
                macs=compute_macs(n.kind, n.kernel, n.in_channels, n.output_dims),
                succs=tuple(succs[n.id]),
            )
            for n in nodes
        )
        return replace(self, layers=layers)


def compute_macs(
    kind: LayerKind,
    kernel: Optional[tuple[int, int]],
    in_channels: int,
    output_dims: tuple[int, int, int],
) -> int:
    """MAC count rule used everywhere, including the validator.

    Weighted spatial kinds use the dense count kh*kw*in_ch*out_h*out_w*out_ch.
    Unweighted compute kinds (pooling, activation, norms, concat, pow) cost one
    op per output element. Shuffle/Constant/Input/Output cost zero.
    """
    if kind in ZERO_MAC_KINDS:
        return 0
    out_h, out_w, out_c = output_dims
    if kind in (LayerKind.CONV, LayerKind.DECONV):
        kh, kw = kernel
        return kh * kw * in_channels * out_h * out_w * out_c
    if kind == LayerKind.FULLY_CONNECTED:
        return in_channels * out_h * out_w * out_c
    return out_h * out_w * out_c


class _ChainBuilder:
    """Builds a simple chain graph, which is the shape of both built-ins."""

    def __init__(self, name: str, input_dims: tuple[int, int, int]):
        self.name = name
        self.input_dims = input_dims
        self.nodes: list[dict] = []
        self.add(LayerKind.INPUT, out_channels=input_dims[2], output_dims=input_dims)

    def add(
        self,
        kind: LayerKind,
        kernel=None,
        stride=None,
        out_channels=None,
        output_dims=None,
        pool_mode=None,
        precision=Precision.FP16,
    ) -> int:
        node_id = len(self.nodes)
        if self.nodes:
            prev = self.nodes[-1]
            in_channels = prev["output_dims"][2]
            preds = (prev["id"],)
            if output_dims is None:
                output_dims = prev["output_dims"]
        else:
            in_channels = out_channels
            preds = ()
        if out_channels is None:
            out_channels = output_dims[2]
        self.nodes.append(
            dict(
                id=node_id,
                kind=kind,
                kernel=kernel,
                stride=stride,
                in_channels=in_channels,
                out_channels=out_channels,
                output_dims=output_dims,
                pool_mode=pool_mode,
                precision=precision,
                preds=preds,
            )
        )
        return node_id

    def build(self, embedding_size=None) -> ModelGraph:
        succs: dict[int, list[int]] = {n["id"]: [] for n in self.nodes}
        for n in self.nodes:
            for p in n["preds"]:
                succs[p].append(n["id"])
        layers = tuple(
            LayerNode(
                id=n["id"],
                kind=n["kind"],
                kernel=n["kernel"],
                stride=n["stride"],
                in_channels=n["in_channels"],
                out_channels=n["out_channels"],
                output_dims=n["output_dims"],
                precision=n["precision"],
                macs=compute_macs(
                    n["kind"], n["kernel"], n["in_channels"], n["output_dims"]
                ),
                preds=tuple(n["preds"]),
                succs=tuple(succs[n["id"]]),
                pool_mode=n["pool_mode"],
            )
            for n in self.nodes
        )
        return ModelGraph(
            name=self.name,
            layers=layers,
            input_dims=self.input_dims,
            embedding_size=embedding_size,
        )


def build_facedetect() -> ModelGraph:
    """ResNet18-shaped detector graph: 18 weight layers on a 224x224x3 input.

    Residual joins are modeled as Activation nodes in a plain chain (the cost
    model does not need skip edges, and keeping the chain shape keeps every
    weighted layer with a unique predecessor).
    """
    b = _ChainBuilder("facedetect", (224, 224, 3))
    b.add(LayerKind.CONV, kernel=(7, 7), stride=(2, 2), output_dims=(112, 112, 64))
    b.add(
        LayerKind.POOLING,
        kernel=(3, 3),
        stride=(2, 2),
        output_dims=(56, 56, 64),
        pool_mode="max",
    )
    stage_dims = [(56, 56, 64), (28, 28, 128), (14, 14, 256), (7, 7, 512)]
    for stage, dims in enumerate(stage_dims):
        for pair in range(2):
            first_stride = (2, 2) if stage > 0 and pair == 0 else (1, 1)
            b.add(LayerKind.CONV, kernel=(3, 3), stride=first_stride, output_dims=dims)
            b.add(LayerKind.CONV, kernel=(3, 3), stride=(1, 1), output_dims=dims)
            b.add(LayerKind.ACTIVATION, output_dims=dims)
    b.add(
        LayerKind.POOLING,
        kernel=(7, 7),
        stride=(1, 1),
        output_dims=(1, 1, 512),
        pool_mode="avg",
    )
    b.add(LayerKind.FULLY_CONNECTED, output_dims=(1, 1, 1000))
    b.add(LayerKind.OUTPUT)
    return b.build()


def build_facenet() -> ModelGraph:
    """Inception-shaped embedding graph ending in a 128-wide vector.

    Each inception block is one composite Conv node (effective 3x3 kernel)
    whose MACs aggregate the block; one explicit Concat closes each resolution
    group. The tail is global-average pool, fully connected 1x1x128, the
    squaring step of the normalization (Pow), then L2Norm.
    """
    b = _ChainBuilder("facenet", (224, 224, 3))
    b.add(LayerKind.CONV, kernel=(7, 7), stride=(2, 2), output_dims=(112, 112, 64))
    b.add(
        LayerKind.POOLING,
        kernel=(3, 3),
        stride=(2, 2),
        output_dims=(56, 56, 64),
        pool_mode="max",
    )
    b.add(LayerKind.BATCH_NORM, output_dims=(56, 56, 64))
    b.add(LayerKind.CONV, kernel=(3, 3), stride=(1, 1), output_dims=(56, 56, 192))
    b.add(LayerKind.CONCAT, output_dims=(56, 56, 192))
    b.add(LayerKind.BATCH_NORM, output_dims=(56, 56, 192))
    b.add(
        LayerKind.POOLING,
        kernel=(3, 3),
        stride=(2, 2),
        output_dims=(28, 28, 192),
        pool_mode="max",
    )
    b.add(LayerKind.CONV, kernel=(3, 3), stride=(1, 1), output_dims=(28, 28, 256))
    b.add(LayerKind.CONV, kernel=(3, 3), stride=(1, 1), output_dims=(28, 28, 320))
    b.add(LayerKind.CONV, kernel=(3, 3), stride=(2, 2), output_dims=(14, 14, 640))
    b.add(LayerKind.CONCAT, output_dims=(14, 14, 640))
    for _ in range(4):
        b.add(LayerKind.CONV, kernel=(3, 3), stride=(1, 1), output_dims=(14, 14, 640))
    b.add(LayerKind.CONV, kernel=(3, 3), stride=(2, 2), output_dims=(7, 7, 1024))
    b.add(LayerKind.CONCAT, output_dims=(7, 7, 1024))
    b.add(LayerKind.CONV, kernel=(3, 3), stride=(1, 1), output_dims=(7, 7, 1024))
    b.add(LayerKind.CONV, kernel=(3, 3), stride=(1, 1), output_dims=(7, 7, 1024))
    b.add(LayerKind.CONCAT, output_dims=(7, 7, 1024))
    b.add(LayerKind.POOLING, output_dims=(1, 1, 1024), pool_mode="global_avg")
    b.add(LayerKind.FULLY_CONNECTED, output_dims=(1, 1, 128))
    b.add(LayerKind.POW, output_dims=(1, 1, 128))
    b.add(LayerKind.L2_NORM, output_dims=(1, 1, 128))
    b.add(LayerKind.OUTPUT)
    return b.build(embedding_size=128)


def validate(g: ModelGraph) -> list[str]:
    """Check every graph invariant; returns all violations (empty list = ok)."""
    violations: list[str] = []
    ids = [n.id for n in g.layers]
    if len(set(ids)) != len(ids):
        violations.append("duplicate layer id")
    by_id = {n.id: n for n in g.layers}

    for n in g.layers:
        for p in n.preds:
            if p not in by_id:
                violations.append(f"layer {n.id}: unknown pred {p}")
            elif n.id not in by_id[p].succs:
                violations.append(f"layer {n.id}: pred {p} lacks matching succ")
        for s in n.succs:
            if s not in by_id:
                violations.append(f"layer {n.id}: unknown succ {s}")

    inputs = g.layers_of_kind(LayerKind.INPUT)
    outputs = g.layers_of_kind(LayerKind.OUTPUT)
    if len(inputs) != 1:
        violations.append(f"expected exactly 1 Input node, found {len(inputs)}")
    if len(outputs) != 1:
        violations.append(f"expected exactly 1 Output node, found {len(outputs)}")

    # topological list order: preds must appear earlier
    pos = {n.id: i for i, n in enumerate(g.layers)}
    for n in g.layers:
        for p in n.preds:
            if p in pos and pos[p] >= pos[n.id]:
                violations.append(f"layer {n.id}: not in topological order (pred {p})")

    # acyclicity via Kahn
    indeg = {n.id: len(n.preds) for n in g.layers}
    queue = [n.id for n in g.layers if indeg[n.id] == 0]
    seen = 0
    while queue:
        cur = queue.pop()
        seen += 1
        for s in by_id[cur].succs:
            indeg[s] -= 1
            if indeg[s] == 0:
                queue.append(s)
    if seen != len(g.layers):
        violations.append("cycle detected")

    # reachability from Input and to Output (only meaningful when acyclic)
    if seen == len(g.layers) and len(inputs) == 1 and len(outputs) == 1:
        fwd = _reachable(by_id, inputs[0].id, forward=True)
        bwd = _reachable(by_id, outputs[0].id, forward=False)
        for n in g.layers:
            if n.id not in fwd:
                violations.append(f"layer {n.id}: unreachable from Input")
            if n.id not in bwd:
                violations.append(f"layer {n.id}: cannot reach Output")

    for n in g.layers:
        expected = compute_macs(n.kind, n.kernel, n.in_channels, n.output_dims)
        if n.kind in ZERO_MAC_KINDS:
            if n.macs != 0:
                violations.append(f"layer {n.id}: macs must be 0 for {n.kind.value}")
        elif n.macs == 0:
            violations.append(f"layer {n.id}: macs must be nonzero for {n.kind.value}")
        elif n.macs != expected:
            violations.append(
                f"layer {n.id}: macs {n.macs} != expected {expected}"
            )
        if n.kind == LayerKind.POOLING and n.pool_mode not in POOL_MODES:
            violations.append(f"layer {n.id}: bad pool mode {n.pool_mode!r}")

        if n.kind in SPATIAL_KINDS:
            if len(n.preds) != 1:
                violations.append(
                    f"layer {n.id}: {n.kind.value} needs a unique predecessor"
                )
                continue
            pred = by_id.get(n.preds[0])
            if pred is None:
                continue
            ph, pw, pc = pred.output_dims
            oh, ow, oc = n.output_dims
            if n.in_channels != pc:
                violations.append(
                    f"layer {n.id}: in_channels {n.in_channels} != pred channels {pc}"
                )
            if n.kind == LayerKind.FULLY_CONNECTED:
                if (oh, ow) != (1, 1) or oc != n.out_channels:
                    violations.append(f"layer {n.id}: fully-connected dims mismatch")
            else:
                sh, sw = n.stride if n.stride else (1, 1)
                if n.kind == LayerKind.CONV:
                    eh, ew = math.ceil(ph / sh), math.ceil(pw / sw)
                else:  # Deconv upsamples
                    eh, ew = ph * sh, pw * sw
                if (oh, ow) != (eh, ew):
                    violations.append(
                        f"layer {n.id}: spatial dims {oh}x{ow} != expected {eh}x{ew}"
                    )

    if g.embedding_size is not None:
        tail = [n for n in g.layers if n.kind != LayerKind.OUTPUT]
        fc_ok = any(
            n.kind == LayerKind.FULLY_CONNECTED
            and n.output_dims == (1, 1, g.embedding_size)
            for n in g.layers
        )
        if not fc_ok:
            violations.append(
                f"embedding graph lacks a fully-connected 1x1x{g.embedding_size}"
            )
        if not tail or tail[-1].kind != LayerKind.L2_NORM:
            violations.append("embedding graph must end with L2Norm before Output")

    return violations


def _reachable(by_id, start, forward=True):
    seen = {start}
    stack = [start]
    while stack:
        cur = by_id[stack.pop()]
        for nxt in cur.succs if forward else cur.preds:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def toposort(g: ModelGraph) -> ModelGraph:
    """Return the graph with layers in a stable topological order.

    Stable: among ready nodes, the one earliest in the current list wins, so
    sorting an already-sorted graph is the identity.
    """
    pos = {n.id: i for i, n in enumerate(g.layers)}
    by_id = {n.id: n for n in g.layers}
    indeg = {n.id: len(n.preds) for n in g.layers}
    ready = sorted([i for i, d in indeg.items() if d == 0], key=pos.get)
    order = []
    while ready:
        cur = ready.pop(0)
        order.append(by_id[cur])
        changed = False
        for s in by_id[cur].succs:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
                changed = True
        if changed:
            ready.sort(key=pos.get)
    if len(order) != len(g.layers):
        raise ValidationError(["cycle detected: cannot toposort"])
    return replace(g, layers=tuple(order))


def with_precision(g: ModelGraph, precision: Precision) -> ModelGraph:
    """Copy of the graph with every layer set to the requested precision."""
    layers = tuple(
        replace(n, precision=precision, macs=n.macs) for n in g.layers
    )
    return replace(g, layers=layers)


def layer_working_set(g: ModelGraph, layer_id: int) -> int:
    """Input tensor bytes + output tensor bytes + parameter bytes of a layer."""
    node = g.layer(layer_id)
    bpe = PRECISION_BYTES[node.precision]
    in_bytes = 0
    for p in node.preds:
        pred = g.layer(p)
        in_bytes += pred.output_elems() * bpe
    return in_bytes + node.output_bytes() + node.param_elems() * bpe


# ---------------------------------------------------------------------------
# Graph file format: UTF-8 text, one record per line, '#' comments,
# header '#hetpipe-graph v1', fields
# id|kind|kernel|stride|in_ch|out_ch|out_dims|precision|preds
# ---------------------------------------------------------------------------

GRAPH_HEADER = "#hetpipe-graph v1"
_FIELD_NAMES = (
    "id",
    "kind",
    "kernel",
    "stride",
    "in_ch",
    "out_ch",
    "out_dims",
    "precision",
    "preds",
)
_KIND_RE = re.compile(r"^([A-Za-z0-9]+)(?:\(([a-z_]+)\))?$")


def _fmt_pair(pair) -> str:
    return "-" if pair is None else f"{pair[0]}x{pair[1]}"


def _fmt_dims(dims) -> str:
    return "x".join(str(d) for d in dims)


def _fmt_kind(node: LayerNode) -> str:
    if node.kind == LayerKind.POOLING:
        return f"Pooling({node.pool_mode})"
    return node.kind.value


def serialize_graph(g: ModelGraph) -> str:
    lines = [GRAPH_HEADER, f"#name {g.name}", f"#input {_fmt_dims(g.input_dims)}"]
    if g.embedding_size is not None:
        lines.append(f"#embedding {g.embedding_size}")
    lines.append("# " + "|".join(_FIELD_NAMES))
    for n in g.layers:
        preds = ",".join(str(p) for p in n.preds) if n.preds else "-"
        lines.append(
            "|".join(
                (
                    str(n.id),
                    _fmt_kind(n),
                    _fmt_pair(n.kernel),
                    _fmt_pair(n.stride),
                    str(n.in_channels),
                    str(n.out_channels),
                    _fmt_dims(n.output_dims),
                    n.precision.value,
                    preds,
                )
            )
        )
    return "\n".join(lines) + "\n"


def save_graph(g: ModelGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_graph(g))


def _parse_pair(token, line_no, fld):
    if token == "-":
        return None
    parts = token.split("x")
    if len(parts) != 2:
        raise GraphParseError(f"bad pair {token!r}", line_no, fld)
    try:
        a, b = int(parts[0]), int(parts[1])
    except ValueError:
        raise GraphParseError(f"non-integer pair {token!r}", line_no, fld) from None
    if a <= 0 or b <= 0:
        raise GraphParseError(f"pair must be positive: {token!r}", line_no, fld)
    return (a, b)


def load_graph(path) -> ModelGraph:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_graph(text, source=str(path))


def parse_graph(text: str, source: str = "<string>") -> ModelGraph:
    lines = text.splitlines()
    if not lines or lines[0].strip() != GRAPH_HEADER:
        raise GraphParseError(f"{source}: missing '{GRAPH_HEADER}' header", 1)
    name = "unnamed"
    input_dims = None
    embedding = None
    records = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("name "):
                name = body[5:].strip()
            elif body.startswith("input "):
                dims = body[6:].strip().split("x")
                input_dims = tuple(int(d) for d in dims)
            elif body.startswith("embedding "):
                embedding = int(body[10:].strip())
            continue
        records.append((line_no, line))

    nodes = []
    seen_ids = set()
    for line_no, line in records:
        fields = line.split("|")
        if len(fields) != len(_FIELD_NAMES):
            raise GraphParseError(
                f"expected {len(_FIELD_NAMES)} fields, got {len(fields)}", line_no
            )
        try:
            node_id = int(fields[0])
        except ValueError:
            raise GraphParseError(f"bad id {fields[0]!r}", line_no, "id") from None
        if node_id in seen_ids:
            raise GraphParseError(f"duplicate id {node_id}", line_no, "id")
        seen_ids.add(node_id)

        m = _KIND_RE.match(fields[1])
        kind_name = m.group(1) if m else None
        pool_mode = m.group(2) if m else None
        try:
            kind = LayerKind(kind_name)
        except ValueError:
            raise GraphParseError(
                f"unknown layer kind {fields[1]!r}", line_no, "kind"
            ) from None
        if kind == LayerKind.POOLING and pool_mode not in POOL_MODES:
            raise GraphParseError(
                f"unknown pool mode {pool_mode!r}", line_no, "kind"
            )
        if kind != LayerKind.POOLING and pool_mode is not None:
            raise GraphParseError(
                f"{kind_name} takes no mode suffix", line_no, "kind"
            )

        kernel = _parse_pair(fields[2], line_no, "kernel")
        stride = _parse_pair(fields[3], line_no, "stride")
        try:
            in_ch, out_ch = int(fields[4]), int(fields[5])
        except ValueError:
            raise GraphParseError("bad channel count", line_no, "in_ch") from None
        dims = fields[6].split("x")
        if len(dims) != 3:
            raise GraphParseError(
                f"out_dims needs 3 components, got {fields[6]!r}", line_no, "out_dims"
            )
        try:
            output_dims = tuple(int(d) for d in dims)
        except ValueError:
            raise GraphParseError(
                f"non-integer out_dims {fields[6]!r}", line_no, "out_dims"
            ) from None
        try:
            precision = Precision(fields[7])
        except ValueError:
            raise GraphParseError(
                f"unknown precision {fields[7]!r}", line_no, "precision"
            ) from None
        if fields[8] == "-":
            preds = ()
        else:
            try:
                preds = tuple(int(p) for p in fields[8].split(","))
            except ValueError:
                raise GraphParseError(
                    f"bad preds list {fields[8]!r}", line_no, "preds"
                ) from None
        nodes.append(
            dict(
                id=node_id,
                kind=kind,
                kernel=kernel,
                stride=stride,
                in_channels=in_ch,
                out_channels=out_ch,
                output_dims=output_dims,
                precision=precision,
                preds=preds,
                pool_mode=pool_mode,
            )
        )

    succs = {n["id"]: [] for n in nodes}
    for n in nodes:
        for p in n["preds"]:
            if p in succs:
                succs[p].append(n["id"])
    layers = tuple(
        LayerNode(
            id=n["id"],
            kind=n["kind"],
            kernel=n["kernel"],
            stride=n["stride"],
            in_channels=n["in_channels"],
            out_channels=n["out_channels"],
            output_dims=n["output_dims"],
            precision=n["precision"],
            macs=compute_macs(
                n["kind"], n["kernel"], n["in_channels"], n["output_dims"]
            ),
            preds=n["preds"],
            succs=tuple(succs[n["id"]]),
            pool_mode=n["pool_mode"],
        )
        for n in nodes
    )
    if input_dims is None:
        for n in layers:
            if n.kind == LayerKind.INPUT:
                input_dims = n.output_dims
                break
    if input_dims is None:
        raise GraphParseError(f"{source}: no Input node and no #input directive")
    g = ModelGraph(
        name=name, layers=layers, input_dims=input_dims, embedding_size=embedding
    )
    problems = validate(g)
    if problems:
        raise ValidationError(problems)
    return g
