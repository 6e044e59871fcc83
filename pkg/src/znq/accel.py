"""Behavioral model of the FPGA accelerator.

The hardware computes one convolution layer per pass over a flat DRAM
image. This module reproduces that behavior closely enough to check the
memory contract and the arithmetic, not the bus timing:

* ``compile_network`` lowers a validated graph onto the accelerator's
  vocabulary: conv passes with fused ReLU, split/concat flags, and an
  optional global-pool + softmax epilogue. Anything the hardware cannot
  express raises UnsupportedForAccelerator.
* ``run_network`` executes the passes against explicit cache structures:
  a 4-line input cache addressed by (row mod 4) that fetches each DRAM
  row at most once per pass, a per-layer preloaded weight cache, per-pixel
  output-channel accumulators, and a global-pool accumulator that
  collects channel sums while conv output pixels stream out. Every DRAM
  word transaction is counted per layer.

Feature maps live in DRAM rows as [y][x][ci] (channel innermost), which
is what the input-cache slot addressing assumes. The host-facing API
still speaks channel-major (ch, h, w) tensors.

Arithmetic matches the hardware pipeline: per input channel a 9-way
multiplier bank feeds a balanced adder tree (see macc_3x3), per-channel
results accumulate in float32 in input-channel order, and bias + ReLU
apply once per output pixel. The reference engine reproduces exactly
this order when asked for accelerator summation order, which is what
makes bit-exact cross-checks possible.

Concat layers cost nothing here: the two producing convs are flagged as
split halves and the second writes its pixels at a channel offset, so
the concatenated map is materialized without moving a single word.
"""

from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import engine, ir
from .errors import (
    CacheOverflow,
    DimMismatch,
    LineTooWide,
    MissingWeights,
    ShapeMismatch,
    UnsupportedForAccelerator,
)

_F32 = np.float32


@dataclass
class AcceleratorConfig:
    """Architecture constants of the implemented design."""

    n_pe: int = 16
    icache_lines: int = 4
    icache_capacity: int = 32768
    wcache_capacity: int = 442368
    ocache_capacity: int = 512
    gpool_capacity: int = 512
    prefetch_latency_cycles: int = 9
    flush_base_cycles: int = 62
    clock_mhz: float = 100.0

    def __post_init__(self):
        if self.icache_capacity % self.icache_lines:
            raise ValueError("icache capacity must split evenly into lines")

    @property
    def icache_line_words(self):
        return self.icache_capacity // self.icache_lines


@dataclass
class AcceleratorLayerConfig:
    """One convolution pass as the hardware sequencer sees it."""

    name: str
    k: int
    s: int
    pad: int
    ch_in: int
    h_in: int
    w_in: int
    ch_out: int
    h_out: int
    w_out: int
    input_region: str
    output_region: str
    out_ch_offset: int = 0
    out_ch_total: int = 0
    fuse_relu: bool = False
    is_1st_split: bool = False
    is_2nd_split: bool = False
    is_global_pool_consumer: bool = False

    @property
    def iterations(self):
        return self.h_out * self.w_out * self.ch_in

    @property
    def weight_words(self):
        return self.k * self.k * self.ch_in * self.ch_out + self.ch_out

    def to_json(self):
        return {
            "name": self.name, "k": self.k, "stride": self.s,
            "ch_in": self.ch_in, "h_in": self.h_in, "w_in": self.w_in,
            "ch_out": self.ch_out, "h_out": self.h_out, "w_out": self.w_out,
            "fuse_relu": self.fuse_relu,
            "is_1st_split": self.is_1st_split,
            "is_2nd_split": self.is_2nd_split,
            "iterations": self.iterations,
            "weight_words": self.weight_words,
        }


@dataclass
class MemTraceCounters:
    """DRAM word transactions attributed to one pass."""

    input_reads: int = 0
    weight_reads: int = 0
    output_writes: int = 0
    output_reads: int = 0

    def add(self, other):
        self.input_reads += other.input_reads
        self.weight_reads += other.weight_reads
        self.output_writes += other.output_writes
        self.output_reads += other.output_reads

    def to_json(self):
        return {
            "input_reads": self.input_reads,
            "weight_reads": self.weight_reads,
            "output_writes": self.output_writes,
            "output_reads": self.output_reads,
        }


@dataclass
class CachePeaks:
    """Peak element occupancy of each on-chip structure during a pass."""

    icache_words: int = 0
    wcache_words: int = 0
    ocache_words: int = 0
    gpool_words: int = 0

    def to_json(self):
        return {
            "icache_words": self.icache_words,
            "wcache_words": self.wcache_words,
            "ocache_words": self.ocache_words,
            "gpool_words": self.gpool_words,
        }


@dataclass
class PoolEpilogue:
    layer_name: str
    region: str
    ch: int
    divisor: int


@dataclass
class CompiledNet:
    layers: list
    regions: "OrderedDict[str, ir.TensorShape]"
    data_region: str
    sink_region: str
    pool: PoolEpilogue = None
    softmax: bool = False

    def __iter__(self):
        return iter(self.layers)

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, i):
        return self.layers[i]


@dataclass
class SimReport:
    output: np.ndarray
    counters: "OrderedDict[str, MemTraceCounters]"
    totals: MemTraceCounters
    peaks: "OrderedDict[str, CachePeaks]"

    def to_json(self):
        return {
            "output_shape": list(self.output.shape),
            "layers": {n: c.to_json() for n, c in self.counters.items()},
            "totals": self.totals.to_json(),
            "peaks": {n: p.to_json() for n, p in self.peaks.items()},
        }


def icache_slot(y, x, ci, w_in, ch_in, lines=4, line_words=8192):
    """Element index of input pixel (y, x, ci) inside the input cache."""
    if w_in * ch_in > line_words:
        raise LineTooWide(
            "input line of %d words exceeds the %d-word cache line"
            % (w_in * ch_in, line_words))
    return (y % lines) * (w_in * ch_in) + x * ch_in + ci


def macc_3x3(pixels, weights):
    """9 products through the fixed balanced adder tree, float32.

    1x1 layers use the same unit with the center product live and the
    other eight operands exact zeros, which leaves the result untouched.
    """
    p = [_F32(pixels[i]) * _F32(weights[i]) for i in range(9)]
    return (((p[0] + p[1]) + (p[2] + p[3]))
            + ((p[4] + p[5]) + (p[6] + p[7]))) + p[8]


def _unsup(msg, layer):
    return UnsupportedForAccelerator(msg, layer=layer)


def compile_network(graph, acc=None):
    """Lower a graph to an ordered list of conv passes plus epilogue."""
    acc = acc or AcceleratorConfig()
    shapes = ir.infer_shapes(graph)
    order = ir.topo_sort(graph)
    deps = ir._resolve_producers(graph)

    datas = [l for l in order if l.kind == ir.KIND_DATA]
    if len(datas) != 1:
        raise _unsup("exactly one data layer required, found %d"
                     % len(datas), datas[1].name if len(datas) > 1 else None)

    # Resolve ReLU/Dropout aliases down to the layer whose output region
    # they pass through, and fuse each ReLU into its producing conv.
    base = {}
    fused = set()
    for l in order:
        if l.kind in (ir.KIND_RELU, ir.KIND_DROPOUT):
            target = base[deps[l.name][0].name]
            base[l.name] = target
            if l.kind == ir.KIND_RELU:
                if target.kind != ir.KIND_CONV:
                    raise _unsup(
                        "activation %r cannot fuse into %s layer %r"
                        % (l.name, target.kind, target.name), l.name)
                fused.add(target.name)
        else:
            base[l.name] = l

    consumers = {}
    for l in order:
        if l.kind in (ir.KIND_RELU, ir.KIND_DROPOUT):
            continue
        for p in deps[l.name]:
            consumers.setdefault(base[p.name].name, []).append(l)

    sinks = [l for l in order
             if l.kind not in (ir.KIND_RELU, ir.KIND_DROPOUT)
             and not consumers.get(l.name)]
    if len(sinks) != 1:
        raise _unsup("network must have exactly one output, found %s"
                     % sorted(l.name for l in sinks), None)

    configs = []
    cfg_by_name = {}
    regions = OrderedDict()
    region_of = {}
    pool = None
    softmax_seen = False

    for l in order:
        if l.kind in (ir.KIND_RELU, ir.KIND_DROPOUT):
            continue
        if softmax_seen or (pool is not None
                            and l.kind != ir.KIND_SOFTMAX):
            raise _unsup("layer %r follows the host epilogue" % l.name,
                         l.name)
        shape = shapes[l.name]

        if l.kind == ir.KIND_DATA:
            regions[l.name] = shape
            region_of[l.name] = l.name

        elif l.kind == ir.KIND_CONV:
            cp = l.conv
            if cp.kernel not in (1, 3):
                raise _unsup("kernel %dx%d not supported, layer %r"
                             % (cp.kernel, cp.kernel, l.name), l.name)
            if cp.pad != cp.kernel // 2:
                raise _unsup("padding %d with kernel %d, layer %r (need %d)"
                             % (cp.pad, cp.kernel, l.name, cp.kernel // 2),
                             l.name)
            if cp.stride not in (1, 2):
                raise _unsup("stride %d not supported, layer %r"
                             % (cp.stride, l.name), l.name)
            src = base[deps[l.name][0].name]
            in_region = region_of[src.name]
            in_shape = regions[in_region]
            cfg = AcceleratorLayerConfig(
                name=l.name, k=cp.kernel, s=cp.stride, pad=cp.pad,
                ch_in=in_shape.ch, h_in=in_shape.h, w_in=in_shape.w,
                ch_out=shape.ch, h_out=shape.h, w_out=shape.w,
                input_region=in_region, output_region=l.name,
                out_ch_total=shape.ch,
                fuse_relu=l.name in fused)
            if cfg.w_in * cfg.ch_in > acc.icache_line_words:
                raise LineTooWide(
                    "layer %r input line is %d words, cache line holds %d"
                    % (l.name, cfg.w_in * cfg.ch_in, acc.icache_line_words),
                    layer=l.name)
            if cfg.weight_words > acc.wcache_capacity:
                raise CacheOverflow(
                    "layer %r needs %d weight words, cache holds %d"
                    % (l.name, cfg.weight_words, acc.wcache_capacity),
                    layer=l.name, cache="wcache")
            if cfg.ch_out > acc.ocache_capacity:
                raise CacheOverflow(
                    "layer %r has %d output channels, accumulator holds %d"
                    % (l.name, cfg.ch_out, acc.ocache_capacity),
                    layer=l.name, cache="ocache")
            configs.append(cfg)
            cfg_by_name[l.name] = cfg
            regions[l.name] = shape
            region_of[l.name] = l.name

        elif l.kind == ir.KIND_CONCAT:
            if len(l.bottoms) != 2:
                raise _unsup("%d-way concat, layer %r (hardware does 2)"
                             % (len(l.bottoms), l.name), l.name)
            halves = [base[p.name] for p in deps[l.name]]
            if halves[0] is halves[1]:
                raise _unsup("concat %r reads the same layer twice" % l.name,
                             l.name)
            cfgs = []
            for h in halves:
                cfg = cfg_by_name.get(h.name)
                if cfg is None:
                    raise _unsup(
                        "concat %r input %r is not a convolution"
                        % (l.name, h.name), l.name)
                if cfg.is_1st_split or cfg.is_2nd_split:
                    raise _unsup(
                        "layer %r already belongs to another concat"
                        % h.name, l.name)
                if [c.name for c in consumers.get(h.name, [])] != [l.name]:
                    raise _unsup(
                        "split half %r must feed only its concat" % h.name,
                        l.name)
                cfgs.append(cfg)
            if cfgs[0].ch_out != cfgs[1].ch_out:
                raise _unsup(
                    "concat %r halves disagree on channels (%d vs %d)"
                    % (l.name, cfgs[0].ch_out, cfgs[1].ch_out), l.name)
            ch = cfgs[0].ch_out
            cfgs[0].is_1st_split = True
            cfgs[1].is_2nd_split = True
            cfgs[1].out_ch_offset = ch
            for cfg in cfgs:
                cfg.output_region = l.name
                cfg.out_ch_total = 2 * ch
                del regions[cfg.name]
            regions[l.name] = shape
            region_of[l.name] = l.name

        elif l.kind == ir.KIND_POOLING:
            p = l.pool
            if not (p and p.global_pool and p.op == ir.POOL_AVE):
                raise _unsup(
                    "only global average pooling runs here, layer %r"
                    % l.name, l.name)
            src = base[deps[l.name][0].name]
            in_region = region_of[src.name]
            feeders = [c for c in configs if c.output_region == in_region]
            if not feeders:
                raise _unsup(
                    "pooling %r must consume a convolution output" % l.name,
                    l.name)
            for cfg in feeders:
                if cfg.ch_out > acc.gpool_capacity:
                    raise CacheOverflow(
                        "pass %r stages %d pooled channels, cache holds %d"
                        % (cfg.name, cfg.ch_out, acc.gpool_capacity),
                        layer=cfg.name, cache="gpool")
                cfg.is_global_pool_consumer = True
            in_shape = regions[in_region]
            pool = PoolEpilogue(l.name, in_region, in_shape.ch,
                                in_shape.h * in_shape.w)
            # pooled vector lives on the host, not in a DRAM region
            region_of[l.name] = in_region

        elif l.kind == ir.KIND_SOFTMAX:
            src = base[deps[l.name][0].name]
            src_shape = shapes[src.name]
            if src_shape.h != 1 or src_shape.w != 1:
                raise _unsup(
                    "softmax %r input must be 1x1 spatially" % l.name,
                    l.name)
            softmax_seen = True
            region_of[l.name] = region_of[src.name]

        else:
            raise _unsup("%s layer %r not supported by the accelerator"
                         % (l.kind, l.name), l.name)

    if pool is not None:
        for c in consumers.get(pool.layer_name, []):
            if c.kind != ir.KIND_SOFTMAX:
                raise _unsup(
                    "layer %r consumes the pooled vector" % c.name, c.name)
    if not configs:
        raise _unsup("network contains no convolution layers", None)

    sink = sinks[0]
    return CompiledNet(
        layers=configs, regions=regions, data_region=datas[0].name,
        sink_region=region_of[sink.name], pool=pool, softmax=softmax_seen)


# Spec'd operation name; shadows the builtin only inside this namespace.
compile = compile_network


def _check_entry(cfg, wts):
    entry = wts.get(cfg.name)
    if entry is None:
        raise MissingWeights("no weights for layer %r" % cfg.name,
                             layer=cfg.name)
    want = (cfg.ch_out, cfg.ch_in, cfg.k, cfg.k)
    if entry.filters.shape != want:
        raise DimMismatch(
            "weights for %r are %r, layer needs %r"
            % (cfg.name, entry.filters.shape, want), layer=cfg.name)
    return entry


def run_layer(cfg, acc, entry, dram, counters, gpool_acc, trace=None):
    """One pass: stream output pixels while caching input rows.

    Mutates the output region inside ``dram`` and the pass's counters;
    returns the pass's CachePeaks.
    """
    peaks = CachePeaks(wcache_words=cfg.weight_words,
                       ocache_words=cfg.ch_out)
    line_words = cfg.w_in * cfg.ch_in
    if line_words > acc.icache_line_words:
        raise LineTooWide(
            "layer %r input line is %d words, cache line holds %d"
            % (cfg.name, line_words, acc.icache_line_words), layer=cfg.name)
    if cfg.weight_words > acc.wcache_capacity:
        raise CacheOverflow("weight cache overflow in %r" % cfg.name,
                            layer=cfg.name, cache="wcache")
    if cfg.ch_out > acc.ocache_capacity:
        raise CacheOverflow("output cache overflow in %r" % cfg.name,
                            layer=cfg.name, cache="ocache")

    src = dram[cfg.input_region]
    dst = dram[cfg.output_region]
    k, s, pad = cfg.k, cfg.s, cfg.pad
    kk = k * k
    ci_n, co_n = cfg.ch_in, cfg.ch_out
    off = cfg.out_ch_offset

    # Weight cache preload: every filter word and bias once.
    counters.weight_reads += cfg.weight_words
    # PE-friendly arrangement: [kernel position][ci][co].
    wbank = np.ascontiguousarray(
        entry.filters.reshape(co_n, ci_n, kk).transpose(2, 1, 0))
    bias = entry.bias
    zero_px = np.zeros(ci_n, _F32)

    slots = [None] * acc.icache_lines
    fetched = np.zeros(cfg.h_in, bool)
    fetch_log = [] if trace is not None else None
    write_log = [] if trace is not None else None

    for y in range(cfg.h_out):
        # Touch the rows this output row needs; first touch fetches the
        # whole DRAM row into its (row mod lines) slot.
        rows = [None] * k
        for j in range(k):
            r = s * y - pad + j
            if not 0 <= r < cfg.h_in:
                continue
            slot = r % acc.icache_lines
            if not fetched[r]:
                fetched[r] = True
                slots[slot] = (r, src[r].reshape(-1).copy())
                counters.input_reads += line_words
                if fetch_log is not None:
                    fetch_log.append(r)
                occ = sum(line_words for s_ in slots if s_ is not None)
                if occ > acc.icache_capacity:
                    raise CacheOverflow(
                        "input cache overflow in %r" % cfg.name,
                        layer=cfg.name, cache="icache")
                peaks.icache_words = max(peaks.icache_words, occ)
            held, data = slots[slot]
            if held != r:
                raise CacheOverflow(
                    "input cache slot clash in %r: row %d evicted row %d "
                    "while still needed" % (cfg.name, held, r),
                    layer=cfg.name, cache="icache")
            rows[j] = data

        for x in range(cfg.w_out):
            # Pixel buffer: the k*k receptive field, one ci-vector per
            # kernel position, zeros materialized for padding.
            pix = np.empty((kk, ci_n), _F32)
            for j in range(k):
                row = rows[j]
                for i in range(k):
                    xi = s * x - pad + i
                    if row is None or not 0 <= xi < cfg.w_in:
                        pix[j * k + i] = zero_px
                    else:
                        pix[j * k + i] = row[xi * ci_n:(xi + 1) * ci_n]
            # All PEs at once: products per kernel position, then the
            # balanced adder tree per input channel (macc_3x3's shape).
            prods = pix[:, :, None] * wbank
            if kk == 9:
                tree = ((((prods[0] + prods[1]) + (prods[2] + prods[3]))
                         + ((prods[4] + prods[5]) + (prods[6] + prods[7])))
                        + prods[8])
            else:
                tree = prods[0]
            ocache = np.zeros(co_n, _F32)
            for ci in range(ci_n):
                ocache += tree[ci]
            ocache += bias
            if cfg.fuse_relu:
                ocache = np.maximum(ocache, _F32(0.0))
            dst[y, x, off:off + co_n] = ocache
            counters.output_writes += co_n
            if write_log is not None:
                write_log.append((y, x, off, off + co_n))
            if cfg.is_global_pool_consumer:
                gpool_acc[off:off + co_n] += ocache
                peaks.gpool_words = max(peaks.gpool_words, co_n)

    if trace is not None:
        trace[cfg.name] = {"fetched_rows": fetch_log, "writes": write_log}
    return peaks


def run_network(net, wts, input_tensor, acc=None, trace=None):
    """Run all passes plus epilogue; returns a SimReport.

    ``net`` is a NetworkGraph or an already compiled CompiledNet.
    """
    acc = acc or AcceleratorConfig()
    if not isinstance(net, CompiledNet):
        net = compile_network(net, acc)

    x = np.asarray(input_tensor, dtype=_F32)
    want = net.regions[net.data_region]
    if x.shape != (want.ch, want.h, want.w):
        raise ShapeMismatch(
            "input tensor %r does not match data shape %r"
            % (x.shape, (want.ch, want.h, want.w)))

    dram = {}
    for name, shape in net.regions.items():
        dram[name] = np.zeros((shape.h, shape.w, shape.ch), _F32)
    dram[net.data_region] = np.ascontiguousarray(x.transpose(1, 2, 0))

    counters = OrderedDict()
    peaks = OrderedDict()
    gpool_acc = None
    if net.pool is not None:
        gpool_acc = np.zeros(net.pool.ch, _F32)

    for cfg in net.layers:
        entry = _check_entry(cfg, wts)
        c = counters[cfg.name] = MemTraceCounters()
        peaks[cfg.name] = run_layer(cfg, acc, entry, dram, c, gpool_acc,
                                    trace)

    if net.pool is not None:
        pooled = gpool_acc / _F32(net.pool.divisor)
        pc = counters[net.pool.layer_name] = MemTraceCounters()
        pc.output_writes = net.pool.ch
        result = pooled.reshape(net.pool.ch, 1, 1)
    else:
        sink = dram[net.sink_region]
        result = np.ascontiguousarray(sink.transpose(2, 0, 1))

    if net.softmax:
        # Host-side epilogue: same code path as the reference engine.
        result = engine.softmax(result)

    totals = MemTraceCounters()
    for c in counters.values():
        totals.add(c)
    return SimReport(output=result, counters=counters, totals=totals,
                     peaks=peaks)
