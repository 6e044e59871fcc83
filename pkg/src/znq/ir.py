"""In-memory network representation: layers, shapes, ordering, structural lint.

A network is an ordered list of layers wired by named blobs. A layer reads
the blobs in ``bottoms`` and writes the single blob ``top``. Rectifier and
dropout layers operate in place (top == bottom); every other layer's top is
its own name. Batch size is fixed at 1 throughout.
"""

from dataclasses import dataclass, field

from .errors import (
    CycleDetected,
    NegativeDimension,
    ShapeMismatch,
    UnresolvedBottom,
    UnsupportedLayer,
)

# Layer kinds. Strings rather than an enum so specs stay trivially
# JSON-able; the set is closed and checked at construction.
KIND_DATA = "Data"
KIND_CONV = "Convolution"
KIND_INNER_PRODUCT = "InnerProduct"
KIND_POOLING = "Pooling"
KIND_RELU = "ReLU"
KIND_CONCAT = "Concat"
KIND_DROPOUT = "Dropout"
KIND_SOFTMAX = "Softmax"

ALL_KINDS = (
    KIND_DATA,
    KIND_CONV,
    KIND_INNER_PRODUCT,
    KIND_POOLING,
    KIND_RELU,
    KIND_CONCAT,
    KIND_DROPOUT,
    KIND_SOFTMAX,
)

# Kinds that may (and must) write their result back onto their input blob.
IN_PLACE_KINDS = (KIND_RELU, KIND_DROPOUT)

POOL_MAX = "MAX"
POOL_AVE = "AVE"


@dataclass(frozen=True)
class TensorShape:
    """Channel-major feature map shape (ch, h, w); all dims >= 1."""

    ch: int
    h: int
    w: int

    def __post_init__(self):
        for name in ("ch", "h", "w"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise NegativeDimension(
                    "tensor dim %s must be a positive integer, got %r" % (name, v)
                )

    def elements(self):
        return self.ch * self.h * self.w


@dataclass
class ConvParams:
    num_output: int
    kernel: int
    stride: int = 1
    pad: int = 0


@dataclass
class PoolParams:
    op: str = POOL_MAX            # POOL_MAX or POOL_AVE
    kernel: int = 0               # ignored when global_pool
    stride: int = 1
    pad: int = 0
    global_pool: bool = False


@dataclass
class LayerSpec:
    """One layer: identity, wiring, and kind-specific parameters.

    ``extras`` holds unknown-but-well-formed text-format fields so a parsed
    description can be serialized back without losing them. They carry no
    semantics here.
    """

    name: str
    kind: str
    bottoms: list = field(default_factory=list)
    top: str = ""
    input_shape: TensorShape = None     # Data
    conv: ConvParams = None             # Convolution
    pool: PoolParams = None             # Pooling
    num_output: int = 0                 # InnerProduct
    dropout_ratio: float = 0.5          # Dropout
    extras: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise UnsupportedLayer(
                "layer %r has unsupported kind %r" % (self.name, self.kind),
                layer=self.name,
                kind=self.kind,
            )
        if not self.top:
            self.top = self.name

    @property
    def in_place(self):
        return self.kind in IN_PLACE_KINDS


@dataclass
class NetworkGraph:
    name: str
    layers: list
    extras: list = field(default_factory=list)

    def layer(self, name):
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(name)


@dataclass
class Diagnostic:
    """Structural lint finding. ``severity`` is "error" or "warning"."""

    severity: str
    rule: str
    layer: str
    message: str
    span: object = None

    def to_json(self):
        out = {
            "severity": self.severity,
            "rule": self.rule,
            "layer": self.layer,
            "message": self.message,
        }
        if self.span is not None:
            out["span"] = {
                "line": self.span.line,
                "col": self.span.col,
                "length": self.span.length,
            }
        return out


def _resolve_producers(graph):
    """Map each layer to the layers producing its bottom blobs.

    A bottom resolves to the nearest earlier layer writing that blob (so
    in-place chains stack correctly). When no earlier writer exists but a
    later one does, the later writer is used, which surfaces as a cycle in
    topo_sort rather than a missing input.
    """
    pos = {id(l): i for i, l in enumerate(graph.layers)}
    writers = {}
    for l in graph.layers:
        writers.setdefault(l.top, []).append(l)

    deps = {}
    for idx, l in enumerate(graph.layers):
        srcs = []
        for b in l.bottoms:
            cands = writers.get(b, [])
            prev = None
            for w in cands:
                if pos[id(w)] < idx and w is not l:
                    prev = w
            if prev is not None:
                srcs.append(prev)
            elif cands and not (len(cands) == 1 and cands[0] is l):
                later = cands[0] if cands[0] is not l else cands[-1]
                srcs.append(later)
            else:
                raise UnresolvedBottom(
                    "layer %r reads blob %r which no layer writes"
                    % (l.name, b),
                    layer=l.name,
                    blob=b,
                )
        deps[l.name] = srcs
    return deps


def topo_sort(graph):
    """Return the layers in dependency order.

    The order is stable: ties are broken by declaration order, so an already
    well-ordered description comes back unchanged. A dependency cycle raises
    CycleDetected naming one offending edge.
    """
    deps = _resolve_producers(graph)
    index = {l.name: i for i, l in enumerate(graph.layers)}
    ordered = []
    done = set()
    on_path = set()

    for root in graph.layers:
        if root.name in done:
            continue
        # Explicit stack; (layer, iterator over producers) frames keep this
        # safe for arbitrarily long chains.
        stack = [(root, iter(sorted(deps[root.name], key=lambda x: index[x.name])))]
        on_path.add(root.name)
        while stack:
            layer, it = stack[-1]
            advanced = False
            for d in it:
                if d.name in done:
                    continue
                if d.name in on_path:
                    raise CycleDetected(
                        "dependency cycle through edge %r -> %r"
                        % (d.name, layer.name),
                        edge=[d.name, layer.name],
                    )
                stack.append(
                    (d, iter(sorted(deps[d.name], key=lambda x: index[x.name])))
                )
                on_path.add(d.name)
                advanced = True
                break
            if not advanced:
                stack.pop()
                on_path.discard(layer.name)
                done.add(layer.name)
                ordered.append(layer)
    return ordered


def _window_out(size, kernel, stride, pad, layer):
    out = (size + 2 * pad - kernel) // stride + 1
    if out < 1:
        raise NegativeDimension(
            "layer %r: window k=%d stride=%d pad=%d leaves no output on input size %d"
            % (layer.name, kernel, stride, pad, size),
            layer=layer.name,
        )
    return out


def infer_shapes(graph):
    """Map layer name -> output TensorShape, walking in dependency order.

    out = floor((in + 2*pad - kernel) / stride) + 1 for convolution and
    windowed pooling; global pooling and inner products collapse to 1x1;
    concat sums channels and requires matching spatial dims; element-wise
    layers pass their input through.
    """
    order = topo_sort(graph)
    deps = _resolve_producers(graph)
    shapes = {}

    def sole_input(l, ins):
        if len(ins) != 1:
            raise ShapeMismatch(
                "layer %r takes exactly one input, has %d"
                % (l.name, len(ins)),
                layer=l.name,
            )
        return ins[0]

    for l in order:
        ins = [shapes[p.name] for p in deps[l.name]]

        if l.kind == KIND_DATA:
            if l.input_shape is None:
                raise ShapeMismatch(
                    "data layer %r declares no input shape" % l.name,
                    layer=l.name,
                )
            out = l.input_shape

        elif l.kind == KIND_CONV:
            s = sole_input(l, ins)
            p = l.conv
            if p is None or p.num_output < 1 or p.kernel < 1:
                raise NegativeDimension(
                    "layer %r: convolution needs num_output >= 1 and kernel >= 1"
                    % l.name,
                    layer=l.name,
                )
            out = TensorShape(
                p.num_output,
                _window_out(s.h, p.kernel, p.stride, p.pad, l),
                _window_out(s.w, p.kernel, p.stride, p.pad, l),
            )

        elif l.kind == KIND_INNER_PRODUCT:
            if l.num_output < 1:
                raise NegativeDimension(
                    "layer %r: inner product needs num_output >= 1" % l.name,
                    layer=l.name,
                )
            out = TensorShape(l.num_output, 1, 1)

        elif l.kind == KIND_POOLING:
            s = sole_input(l, ins)
            p = l.pool
            if p.global_pool:
                out = TensorShape(s.ch, 1, 1)
            else:
                if p.kernel < 1:
                    raise NegativeDimension(
                        "layer %r: pooling needs kernel >= 1" % l.name,
                        layer=l.name,
                    )
                out = TensorShape(
                    s.ch,
                    _window_out(s.h, p.kernel, p.stride, p.pad, l),
                    _window_out(s.w, p.kernel, p.stride, p.pad, l),
                )

        elif l.kind == KIND_CONCAT:
            if not ins:
                raise ShapeMismatch(
                    "concat layer %r has no inputs" % l.name, layer=l.name
                )
            h, w = ins[0].h, ins[0].w
            for p, s in zip(deps[l.name], ins):
                if (s.h, s.w) != (h, w):
                    raise ShapeMismatch(
                        "concat %r: inputs %r (%dx%d) and %r (%dx%d) disagree"
                        % (l.name, deps[l.name][0].name, h, w, p.name, s.h, s.w),
                        layer=l.name,
                        layers=[deps[l.name][0].name, p.name],
                    )
            out = TensorShape(sum(s.ch for s in ins), h, w)

        else:  # ReLU, Dropout, Softmax: identity
            s = sole_input(l, ins)
            out = s

        shapes[l.name] = out

    return shapes


def validate(graph):
    """Structural lint. Returns [] when every naming invariant holds.

    Errors flag invariant violations (top/name discipline, unresolved
    blobs, duplicate names); warnings flag legal-but-suspect parameters
    (padding wider than half the kernel).
    """
    diags = []
    seen = set()

    for l in graph.layers:
        if l.name in seen:
            diags.append(Diagnostic(
                "error", "duplicate-name", l.name,
                "layer name %r appears more than once" % l.name))
        seen.add(l.name)

        if l.in_place:
            if len(l.bottoms) != 1 or l.top != l.bottoms[0]:
                diags.append(Diagnostic(
                    "error", "in-place", l.name,
                    "layer %r must write back onto its input blob "
                    "(top == bottom)" % l.name))
        else:
            if l.top != l.name:
                diags.append(Diagnostic(
                    "error", "top-name", l.name,
                    "layer %r writes blob %r; non-in-place layers must "
                    "write a blob named after themselves" % (l.name, l.top)))

        if l.kind == KIND_CONV and l.conv is not None:
            if l.conv.pad > l.conv.kernel // 2:
                diags.append(Diagnostic(
                    "warning", "padding", l.name,
                    "layer %r: padding %d exceeds half the kernel (%d)"
                    % (l.name, l.conv.pad, l.conv.kernel // 2)))

        if l.kind == KIND_DATA and l.bottoms:
            diags.append(Diagnostic(
                "error", "data-input", l.name,
                "data layer %r must not read any blob" % l.name))

        n_in = {KIND_DATA: 0, KIND_CONCAT: None}.get(l.kind, 1)
        if n_in == 1 and len(l.bottoms) != 1:
            diags.append(Diagnostic(
                "error", "arity", l.name,
                "layer %r expects exactly one input blob, has %d"
                % (l.name, len(l.bottoms))))

    try:
        topo_sort(graph)
    except (CycleDetected, UnresolvedBottom) as e:
        diags.append(Diagnostic(
            "error", e.code, e.details.get("layer", ""), e.message))

    return diags
