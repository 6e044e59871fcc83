"""Binary containers for parameters and feature maps, and the seeded
parameter initializer.

Both containers are little-endian with a 4-byte magic and a u32 format
version:

  weights ("ZNQW"): per-layer records of
      name_len u32, name UTF-8, ch_in u32, ch_out u32, k u32,
      filters float32[ch_out*ch_in*k*k], bias float32[ch_out]
  records run to end of file, in network dependency order, no duplicates.

  tensor ("ZNQT"): ch u32, h u32, w u32, data float32[ch*h*w] channel-major.

The initializer draws from a single SplitMix64 stream per seed: each 64-bit
output z maps to a float via u = (z >> 11) * 2^-53, val = (2u-1)*r with
r = sqrt(3 / (k^2 * ch_in)), cast to float32. Filters consume the stream in
[co][ci][ky][kx] order, layer by layer in dependency order; biases are zero
and consume nothing. The mapping is integer-based and bit-stable across
platforms.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import ir
from .errors import (
    BadMagic,
    DimMismatch,
    MissingWeights,
    TruncatedFile,
    VersionUnsupported,
)

WEIGHTS_MAGIC = b"ZNQW"
TENSOR_MAGIC = b"ZNQT"
FORMAT_VERSION = 1

_MASK64 = (1 << 64) - 1


def splitmix64(seed):
    """Infinite stream of 64-bit outputs of the SplitMix64 generator."""
    x = seed & _MASK64
    while True:
        x = (x + 0x9E3779B97F4A7C15) & _MASK64
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        yield (z ^ (z >> 31)) & _MASK64


def _splitmix_block(seed, start, count):
    """Outputs start..start+count-1 of the seed's stream, vectorized.

    The state after n steps is seed + n * golden (mod 2^64), so any block
    can be produced directly; bit-identical to iterating splitmix64().
    """
    golden = np.uint64(0x9E3779B97F4A7C15)
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + idx * golden
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _uniform(seed, start, r, count):
    """count float32 draws from [-r, r), bit-deterministic."""
    z = _splitmix_block(seed, start, count)
    u = (z >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    return ((2.0 * u - 1.0) * r).astype(np.float32)


@dataclass
class WeightEntry:
    name: str
    filters: np.ndarray    # float32 (ch_out, ch_in, k, k)
    bias: np.ndarray       # float32 (ch_out,)

    def __post_init__(self):
        self.filters = np.ascontiguousarray(self.filters, dtype=np.float32)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float32)
        if self.filters.ndim != 4 or self.filters.shape[2] != self.filters.shape[3]:
            raise DimMismatch(
                "entry %r: filters must be (ch_out, ch_in, k, k), got %s"
                % (self.name, self.filters.shape))
        if self.bias.shape != (self.filters.shape[0],):
            raise DimMismatch(
                "entry %r: bias length %d does not match ch_out %d"
                % (self.name, self.bias.shape[0], self.filters.shape[0]))

    @property
    def ch_out(self):
        return self.filters.shape[0]

    @property
    def ch_in(self):
        return self.filters.shape[1]

    @property
    def k(self):
        return self.filters.shape[2]


def random_weights(graph, seed):
    """Seeded parameters for every parameterized layer of a network."""
    shapes = ir.infer_shapes(graph)
    deps = ir._resolve_producers(graph)
    consumed = 0
    out = {}
    for l in ir.topo_sort(graph):
        if l.kind == ir.KIND_CONV:
            ch_in = shapes[deps[l.name][0].name].ch
            k = l.conv.kernel
            co = l.conv.num_output
        elif l.kind == ir.KIND_INNER_PRODUCT:
            ch_in = shapes[deps[l.name][0].name].elements()
            k = 1
            co = l.num_output
        else:
            continue
        r = (3.0 / (k * k * ch_in)) ** 0.5
        n = co * ch_in * k * k
        filters = _uniform(seed, consumed, r, n).reshape(co, ch_in, k, k)
        consumed += n
        out[l.name] = WeightEntry(l.name, filters,
                                  np.zeros(co, dtype=np.float32))
    return out


def check_weights(graph, weights):
    """Raise unless every parameterized layer has a matching entry."""
    shapes = ir.infer_shapes(graph)
    deps = ir._resolve_producers(graph)
    for l in graph.layers:
        if l.kind == ir.KIND_CONV:
            want = (l.conv.num_output,
                    shapes[deps[l.name][0].name].ch,
                    l.conv.kernel)
        elif l.kind == ir.KIND_INNER_PRODUCT:
            want = (l.num_output,
                    shapes[deps[l.name][0].name].elements(),
                    1)
        else:
            continue
        e = weights.get(l.name)
        if e is None:
            raise MissingWeights("no weights for layer %r" % l.name,
                                 layer=l.name)
        if (e.ch_out, e.ch_in, e.k) != want:
            raise DimMismatch(
                "layer %r wants filters (%d, %d, %dx%d), file has (%d, %d, %dx%d)"
                % ((l.name,) + want + (want[2],)
                   + (e.ch_out, e.ch_in, e.k, e.k)),
                layer=l.name)


# --- container I/O --------------------------------------------------------------

def _read_exact(f, n, what):
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFile("file ends inside %s (wanted %d bytes, got %d)"
                            % (what, n, len(data)))
    return data


def _check_header(f, magic, kind):
    got = f.read(4)
    if len(got) < 4 or got != magic:
        raise BadMagic("not a %s file (magic %r)" % (kind, got))
    (version,) = struct.unpack("<I", _read_exact(f, 4, "version"))
    if version != FORMAT_VERSION:
        raise VersionUnsupported(
            "%s format version %d unsupported (expected %d)"
            % (kind, version, FORMAT_VERSION))


def save_weights(path, entries):
    """Write entries (dict name -> WeightEntry, ordered) to a container."""
    with open(path, "wb") as f:
        f.write(WEIGHTS_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        for e in entries.values():
            name = e.name.encode("utf-8")
            f.write(struct.pack("<I", len(name)))
            f.write(name)
            f.write(struct.pack("<III", e.ch_in, e.ch_out, e.k))
            f.write(np.ascontiguousarray(e.filters, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(e.bias, dtype="<f4").tobytes())


def load_weights(path):
    """Read a weights container back into an ordered dict."""
    out = {}
    with open(path, "rb") as f:
        _check_header(f, WEIGHTS_MAGIC, "weights")
        while True:
            head = f.read(4)
            if not head:
                return out
            if len(head) < 4:
                raise TruncatedFile("file ends inside an entry header")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(f, name_len, "an entry name").decode(
                "utf-8", errors="replace")
            ch_in, ch_out, k = struct.unpack(
                "<III", _read_exact(f, 12, "entry dims for %r" % name))
            if min(ch_in, ch_out, k) < 1:
                raise DimMismatch(
                    "entry %r declares empty dims (%d, %d, %d)"
                    % (name, ch_in, ch_out, k))
            n_f = ch_out * ch_in * k * k
            raw = _read_exact(f, 4 * n_f, "filters of %r" % name)
            filters = np.frombuffer(raw, dtype="<f4").reshape(ch_out, ch_in, k, k)
            raw = _read_exact(f, 4 * ch_out, "bias of %r" % name)
            bias = np.frombuffer(raw, dtype="<f4")
            if name in out:
                raise DimMismatch("entry %r appears twice" % name)
            out[name] = WeightEntry(name, filters.copy(), bias.copy())


def save_tensor(path, arr):
    """Write one channel-major float32 feature map."""
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if arr.ndim != 3:
        raise DimMismatch("tensor must be (ch, h, w), got shape %s"
                          % (arr.shape,))
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<III", *arr.shape))
        f.write(arr.tobytes())


def load_tensor(path):
    """Read a feature map; declared dims must match the payload exactly."""
    with open(path, "rb") as f:
        _check_header(f, TENSOR_MAGIC, "tensor")
        ch, h, w = struct.unpack("<III", _read_exact(f, 12, "tensor dims"))
        if min(ch, h, w) < 1:
            raise DimMismatch("tensor declares empty dims (%d, %d, %d)"
                              % (ch, h, w))
        payload = f.read()
    want = 4 * ch * h * w
    if len(payload) != want:
        raise DimMismatch(
            "tensor declares %dx%dx%d (%d bytes) but carries %d bytes"
            % (ch, h, w, want, len(payload)))
    return np.frombuffer(payload, dtype="<f4").reshape(ch, h, w).copy()
