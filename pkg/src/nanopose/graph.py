"""Chain IR for the pose-estimation CNN family, shape inference and footprint
analysis.

Shapes are (channels, height, width) throughout.  The reference family has
three variants named by input width and base channel count: 160x32, 160x16,
and 80x32.
"""

import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import SchemaError

CONV = "conv2d"
POOL = "maxpool"
REQUANT = "requant_act"
FC = "fully_connected"
DROPOUT = "dropout_noop"

KINDS = (CONV, POOL, REQUANT, FC, DROPOUT)

VARIANTS = ("160x32", "160x16", "80x32")


@dataclass
class LayerSpec:
    kind: str
    name: str
    in_ch: int = 0
    out_ch: int = 0
    kernel: tuple = (1, 1)
    stride: tuple = (1, 1)
    padding: tuple = (0, 0)
    in_shape: tuple = None
    out_shape: tuple = None

    def weight_count(self) -> int:
        if self.kind == CONV:
            return self.out_ch * self.in_ch * self.kernel[0] * self.kernel[1]
        if self.kind == FC:
            return self.out_ch * self.in_ch
        return 0

    def macs(self) -> int:
        if self.kind == CONV:
            _, h, w = self.out_shape
            return h * w * self.weight_count()
        if self.kind == FC:
            return self.weight_count()
        return 0


@dataclass
class NetGraph:
    layers: list
    input_shape: tuple
    variant: str = ""

    def layer(self, name: str) -> LayerSpec:
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(name)


@dataclass
class GraphStats:
    macs: int
    params: int
    memory_bytes: int


def conv_out_hw(h, w, kernel, stride, padding):
    kh, kw = kernel
    sh, sw = stride
    ph, pw = padding
    oh = (h + 2 * ph - kh) // sh + 1
    ow = (w + 2 * pw - kw) // sw + 1
    return oh, ow


def infer_shapes(g: NetGraph) -> NetGraph:
    """Fill every layer's in/out shape by walking the chain."""
    shape = tuple(g.input_shape)
    for l in g.layers:
        l.in_shape = shape
        c, h, w = shape
        if l.kind == CONV:
            if l.in_ch != c:
                raise SchemaError(f"{l.name}: in_ch {l.in_ch} != incoming channels {c}")
            oh, ow = conv_out_hw(h, w, l.kernel, l.stride, l.padding)
            if oh <= 0 or ow <= 0:
                raise SchemaError(f"{l.name}: spatial dimension collapsed to {oh}x{ow}")
            shape = (l.out_ch, oh, ow)
        elif l.kind == POOL:
            oh, ow = h // l.stride[0], w // l.stride[1]
            if oh <= 0 or ow <= 0:
                raise SchemaError(f"{l.name}: spatial dimension collapsed to {oh}x{ow}")
            l.in_ch = l.out_ch = c
            shape = (c, oh, ow)
        elif l.kind in (REQUANT, DROPOUT):
            l.in_ch = l.out_ch = c
        elif l.kind == FC:
            flat = c * h * w
            if l.in_ch != flat:
                raise SchemaError(f"{l.name}: in features {l.in_ch} != flattened input {flat}")
            shape = (l.out_ch, 1, 1)
        else:
            raise SchemaError(f"unknown layer kind {l.kind!r}")
        l.out_shape = shape
    return g


def build_frontnet(input_width: int, base_channels: int) -> NetGraph:
    """Build one of the three reference variants.

    Chain: 5x5/s2 conv + activation, 2x2 max-pool, then three blocks of
    [3x3/s2 conv + act, 3x3/s1 conv + act] with channel progression
    c -> c -> 2c -> 4c (the first conv of blocks 2 and 3 doubles channels),
    a dropout kept as an inference no-op, and a 4-output fully connected
    head (x, y, z, theta).
    """
    if (input_width, base_channels) not in ((160, 32), (160, 16), (80, 32)):
        raise SchemaError(f"unsupported variant ({input_width}, {base_channels})")
    h = 96 if input_width == 160 else 48
    c = base_channels
    layers = [
        LayerSpec(CONV, "conv1", in_ch=1, out_ch=c, kernel=(5, 5), stride=(2, 2), padding=(2, 2)),
        LayerSpec(REQUANT, "act1"),
        LayerSpec(POOL, "pool1", kernel=(2, 2), stride=(2, 2)),
    ]
    ch = c
    for b, out0 in enumerate((c, 2 * c, 4 * c), start=1):
        layers += [
            LayerSpec(CONV, f"b{b}c1", in_ch=ch, out_ch=out0, kernel=(3, 3), stride=(2, 2), padding=(1, 1)),
            LayerSpec(REQUANT, f"b{b}a1"),
            LayerSpec(CONV, f"b{b}c2", in_ch=out0, out_ch=out0, kernel=(3, 3), stride=(1, 1), padding=(1, 1)),
            LayerSpec(REQUANT, f"b{b}a2"),
        ]
        ch = out0
    g = NetGraph(layers=layers, input_shape=(1, h, input_width), variant=f"{input_width}x{base_channels}")
    infer_shapes(g)
    cf, hf, wf = g.layers[-1].out_shape
    layers.append(LayerSpec(DROPOUT, "drop"))
    layers.append(LayerSpec(FC, "fc", in_ch=cf * hf * wf, out_ch=4))
    return infer_shapes(g)


def build_variant(tag: str) -> NetGraph:
    if tag not in VARIANTS:
        raise SchemaError(f"unknown variant {tag!r}; expect one of {VARIANTS}")
    w, c = tag.split("x")
    return build_frontnet(int(w), int(c))


def _buffer_bytes(l: LayerSpec) -> int:
    # One activation buffer per executed stage: conv and pool outputs are
    # 8-bit elements, the head's four outputs are 32-bit fixed point.
    if l.kind in (CONV, POOL):
        return int(np.prod(l.out_shape))
    if l.kind == FC:
        return 4 * int(np.prod(l.out_shape))
    return 0


def analyze(g: NetGraph) -> GraphStats:
    """MAC, parameter, and straightforward-implementation memory totals.

    MACs count convolutional and fully connected layers only.  Memory sums
    the input image, all weights, and every intermediate activation buffer
    at one byte per element (four for the 32-bit head outputs).
    """
    validate(g)
    macs = sum(l.macs() for l in g.layers)
    params = sum(l.weight_count() for l in g.layers)
    memory = int(np.prod(g.input_shape)) + params + sum(_buffer_bytes(l) for l in g.layers)
    return GraphStats(macs=macs, params=params, memory_bytes=memory)


def layer_table(g: NetGraph):
    """Per-layer analysis rows for reports."""
    rows = []
    for l in g.layers:
        rows.append(
            dict(
                name=l.name,
                kind=l.kind,
                in_shape="x".join(map(str, l.in_shape)),
                out_shape="x".join(map(str, l.out_shape)),
                macs=l.macs(),
                params=l.weight_count(),
                buffer_bytes=_buffer_bytes(l),
            )
        )
    return rows


def validate(g: NetGraph) -> None:
    if not g.layers:
        raise SchemaError("empty graph")
    shape = tuple(g.input_shape)
    for l in g.layers:
        if l.kind not in KINDS:
            raise SchemaError(f"unknown layer kind {l.kind!r}")
        if l.in_shape is None or l.out_shape is None:
            raise SchemaError(f"{l.name}: shapes not inferred")
        if tuple(l.in_shape) != shape:
            raise SchemaError(f"{l.name}: in_shape {l.in_shape} != previous out_shape {shape}")
        shape = tuple(l.out_shape)


def to_json(g: NetGraph) -> str:
    doc = {
        "format": "nanopose-graph",
        "version": 1,
        "variant": g.variant,
        "input_shape": list(g.input_shape),
        "layers": [asdict(l) for l in g.layers],
    }
    return json.dumps(doc, indent=2)


def from_json(text: str) -> NetGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"graph document is not valid JSON: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != "nanopose-graph":
        raise SchemaError("not a nanopose-graph document")
    try:
        layers = [
            LayerSpec(
                kind=d["kind"],
                name=d["name"],
                in_ch=d["in_ch"],
                out_ch=d["out_ch"],
                kernel=tuple(d["kernel"]),
                stride=tuple(d["stride"]),
                padding=tuple(d["padding"]),
                in_shape=tuple(d["in_shape"]) if d.get("in_shape") else None,
                out_shape=tuple(d["out_shape"]) if d.get("out_shape") else None,
            )
            for d in doc["layers"]
        ]
        g = NetGraph(layers=layers, input_shape=tuple(doc["input_shape"]), variant=doc.get("variant", ""))
    except (KeyError, TypeError) as e:
        raise SchemaError(f"graph document missing field: {e}") from e
    infer_shapes(g)
    validate(g)
    return g
