"""Static per-layer cost accounting: arithmetic operations, parameters and
activation footprints.

Counting conventions:
  - convolution: macc = h_out*w_out*ch_in*ch_out*k^2; the per-output bias
    contribution is an add, not a macc; params = k^2*ch_in*ch_out + ch_out
  - inner product: macc over the flattened input, bias as adds
  - ReLU: one comparison per element
  - max pooling: k^2-1 comparisons per output
  - average pooling: one add per contributing input element, one div per
    output element (global pooling contributes the whole input plane)
  - softmax: ch exps, ch-1 adds, ch divs
  - concat/dropout/data: no arithmetic
  - every layer counts its full output once as activations, in-place
    rectifiers and dropout included
"""

import csv
import io
from dataclasses import dataclass, field

from . import ir


@dataclass
class LayerCost:
    name: str
    kind: str
    shape: ir.TensorShape
    macc: int = 0
    comp: int = 0
    add: int = 0
    div: int = 0
    exp: int = 0
    params: int = 0
    activations: int = 0
    bottoms: list = field(default_factory=list)

    def to_json(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "ch_out": self.shape.ch,
            "h_out": self.shape.h,
            "w_out": self.shape.w,
            "macc": self.macc,
            "comp": self.comp,
            "add": self.add,
            "div": self.div,
            "exp": self.exp,
            "params": self.params,
            "activations": self.activations,
            "bottoms": list(self.bottoms),
        }


@dataclass
class GroupCost:
    name: str
    macc: int = 0
    comp: int = 0
    add: int = 0
    div: int = 0
    exp: int = 0
    params: int = 0
    activations: int = 0

    def absorb(self, c):
        self.macc += c.macc
        self.comp += c.comp
        self.add += c.add
        self.div += c.div
        self.exp += c.exp
        self.params += c.params
        self.activations += c.activations

    def to_json(self):
        return {
            "name": self.name,
            "macc": self.macc,
            "comp": self.comp,
            "add": self.add,
            "div": self.div,
            "exp": self.exp,
            "params": self.params,
            "activations": self.activations,
        }


@dataclass
class AnalysisReport:
    per_layer: list
    per_module: list
    totals: GroupCost = None

    def to_json(self):
        return {
            "layers": [r.to_json() for r in self.per_layer],
            "modules": [m.to_json() for m in self.per_module],
            "totals": self.totals.to_json(),
        }


def _cost(layer, out, ins):
    c = LayerCost(layer.name, layer.kind, out, bottoms=layer.bottoms)
    c.activations = out.elements()

    if layer.kind == ir.KIND_CONV:
        p = layer.conv
        ch_in = ins[0].ch
        c.macc = out.h * out.w * ch_in * p.num_output * p.kernel * p.kernel
        c.add = out.elements()
        c.params = p.kernel * p.kernel * ch_in * p.num_output + p.num_output

    elif layer.kind == ir.KIND_INNER_PRODUCT:
        flat = ins[0].elements()
        c.macc = flat * layer.num_output
        c.add = layer.num_output
        c.params = flat * layer.num_output + layer.num_output

    elif layer.kind == ir.KIND_RELU:
        c.comp = ins[0].elements()

    elif layer.kind == ir.KIND_POOLING:
        p = layer.pool
        if p.op == ir.POOL_MAX:
            window = ins[0].h * ins[0].w if p.global_pool else p.kernel * p.kernel
            c.comp = out.elements() * (window - 1)
        else:
            contributing = ins[0].elements() if p.global_pool \
                else out.elements() * p.kernel * p.kernel
            c.add = contributing
            c.div = out.elements()

    elif layer.kind == ir.KIND_SOFTMAX:
        c.exp = out.ch
        c.add = out.ch - 1
        c.div = out.ch

    # Data, Concat, Dropout: no arithmetic.
    return c


def module_of(name):
    """Group key: the path prefix before '/', or the name itself."""
    return name.split("/", 1)[0]


def analyze(graph):
    """Walk the network in dependency order and cost every layer."""
    shapes = ir.infer_shapes(graph)
    order = ir.topo_sort(graph)
    deps = ir._resolve_producers(graph)

    per_layer = []
    for l in order:
        ins = [shapes[p.name] for p in deps[l.name]]
        per_layer.append(_cost(l, shapes[l.name], ins))

    per_module = []
    groups = {}
    for c in per_layer:
        key = module_of(c.name)
        if key not in groups:
            groups[key] = GroupCost(key)
            per_module.append(groups[key])
        groups[key].absorb(c)

    totals = GroupCost("TOTAL")
    for c in per_layer:
        totals.absorb(c)

    return AnalysisReport(per_layer, per_module, totals)


CSV_HEADER = ["name", "kind", "ch_out", "h_out", "w_out",
              "macc", "comp", "add", "div", "exp", "params", "activations"]


def to_csv(report):
    """Render the per-layer table plus a TOTAL row (RFC 4180)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_HEADER)
    for c in report.per_layer:
        w.writerow([c.name, c.kind, c.shape.ch, c.shape.h, c.shape.w,
                    c.macc, c.comp, c.add, c.div, c.exp,
                    c.params, c.activations])
    t = report.totals
    w.writerow(["TOTAL", "", "", "", "",
                t.macc, t.comp, t.add, t.div, t.exp,
                t.params, t.activations])
    return buf.getvalue()
