"""Float32 reference executor for supported layer graphs.

This is the golden model the accelerator simulation is checked against,
so its arithmetic is pinned down to the bit:

* Convolution is cross-correlation (no kernel flip), zero padding.
* All tensors and intermediates are float32. Products and sums round to
  float32 at every step; nothing accumulates in double behind the back.
* Per output pixel the summation order is fixed: input channels outer,
  then kernel positions row-major, one product added at a time.
* ``order="accelerator"`` switches to the summation order the hardware
  pipeline uses: per input channel the k*k products collapse through a
  balanced adder tree (adjacent pairs per level, odd operand carried),
  and the per-channel results accumulate sequentially. For k=3 that is
  ((p0+p1)+(p2+p3)) + ((p4+p5)+(p6+p7)) + p8.
* ``wide_accumulate=True`` carries the accumulation in float64 and
  rounds once at the end. Test aid only; never the shipped behavior.

Global average pooling sums each channel over spatial positions in
raster order, sequentially, in float32, then multiplies by 1/(h*w) --
the same order the accumulation hardware produces, so results stay
bit-comparable. Softmax subtracts the max before exponentiation.

Dropout is an identity at inference time and executes as one.
"""

import numpy as np

from . import ir, weights as weights_io
from .errors import NonFiniteResult, ShapeMismatch, UnsupportedLayer

ORDER_SEQUENTIAL = "sequential"
ORDER_ACCELERATOR = "accelerator"

_F32_ZERO = np.float32(0.0)


def _tree_sum(items):
    """Balanced pairwise sum; pinned reduction shape for any operand count."""
    while len(items) > 1:
        nxt = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def conv_layer(x, filters, bias, stride=1, pad=0, fuse_relu=False,
               order=ORDER_SEQUENTIAL, wide_accumulate=False):
    """Cross-correlate x (ch,h,w) with filters (co,ci,k,k) plus bias.

    Returns a float32 (co,h_out,w_out) array. See the module docstring
    for the exact summation-order contract.
    """
    x = np.asarray(x, dtype=np.float32)
    filters = np.asarray(filters, dtype=np.float32)
    bias = np.asarray(bias, dtype=np.float32)
    if x.ndim != 3:
        raise ShapeMismatch("input must be (ch, h, w), got %r" % (x.shape,))
    ch_in, h_in, w_in = x.shape
    if (filters.ndim != 4 or filters.shape[1] != ch_in
            or filters.shape[2] != filters.shape[3]):
        raise ShapeMismatch(
            "filters %r do not fit input with %d channels"
            % (filters.shape, ch_in))
    ch_out, _, k, _ = filters.shape
    if bias.shape != (ch_out,):
        raise ShapeMismatch(
            "bias %r does not match %d output channels"
            % (bias.shape, ch_out))

    h_out = ir._window_out(h_in, k, stride, pad, "<conv>")
    w_out = ir._window_out(w_in, k, stride, pad, "<conv>")

    acc_t = np.float64 if wide_accumulate else np.float32
    padded = np.zeros((ch_in, h_in + 2 * pad, w_in + 2 * pad), acc_t)
    padded[:, pad:pad + h_in, pad:pad + w_in] = x
    f = filters.astype(acc_t, copy=False)
    out = np.zeros((ch_out, h_out, w_out), acc_t)

    def view(ci, j, i):
        return padded[ci,
                      j:j + stride * h_out:stride,
                      i:i + stride * w_out:stride]

    if order == ORDER_SEQUENTIAL:
        for ci in range(ch_in):
            for j in range(k):
                for i in range(k):
                    out += view(ci, j, i)[None] * f[:, ci, j, i, None, None]
    elif order == ORDER_ACCELERATOR:
        for ci in range(ch_in):
            prods = [view(ci, j, i)[None] * f[:, ci, j, i, None, None]
                     for j in range(k) for i in range(k)]
            out += _tree_sum(prods)
    else:
        raise ValueError("unknown summation order %r" % (order,))

    out += bias.astype(acc_t, copy=False)[:, None, None]
    if fuse_relu:
        out = np.maximum(out, acc_t(0))
    return out.astype(np.float32, copy=False)


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float32), _F32_ZERO)


def max_pool(x, k, s, pad=0):
    """Window max over (h, w) per channel; padding never wins the max."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3:
        raise ShapeMismatch("input must be (ch, h, w), got %r" % (x.shape,))
    ch, h_in, w_in = x.shape
    h_out = ir._window_out(h_in, k, s, pad, "<pool>")
    w_out = ir._window_out(w_in, k, s, pad, "<pool>")
    padded = np.full((ch, h_in + 2 * pad, w_in + 2 * pad), -np.inf,
                     np.float32)
    padded[:, pad:pad + h_in, pad:pad + w_in] = x
    views = [padded[:, j:j + s * h_out:s, i:i + s * w_out:s]
             for j in range(k) for i in range(k)]
    return np.maximum.reduce(views)


def avg_pool_global(x):
    """Spatial mean per channel, accumulated sequentially in raster order."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3:
        raise ShapeMismatch("input must be (ch, h, w), got %r" % (x.shape,))
    ch, h, w = x.shape
    acc = np.zeros(ch, np.float32)
    for y in range(h):
        for i in range(w):
            acc += x[:, y, i]
    out = acc / np.float32(h * w)
    return out.reshape(ch, 1, 1)


def concat(inputs):
    """Stack along the channel axis in argument order."""
    arrs = [np.asarray(a, dtype=np.float32) for a in inputs]
    if not arrs:
        raise ShapeMismatch("concat of zero inputs")
    hw = {a.shape[1:] for a in arrs}
    if len(hw) != 1:
        raise ShapeMismatch(
            "concat inputs disagree on spatial dims: %s"
            % sorted(map(str, hw)))
    return np.concatenate(arrs, axis=0)


def softmax(x):
    """Class probabilities for a (ch,1,1) logit tensor, max-subtracted."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != 1:
        raise ShapeMismatch(
            "softmax input must be (ch, 1, 1), got %r" % (x.shape,))
    shifted = x - np.max(x)
    e = np.exp(shifted)
    return e / np.sum(e, dtype=np.float32)


def run_network(graph, wts, input_tensor, order=ORDER_SEQUENTIAL,
                trace=None):
    """Execute every layer in dependency order; return the last output.

    ``wts`` maps layer name -> WeightEntry for each convolution.  When
    ``trace`` is a dict, it receives a copy of every layer's output
    under the layer's name. Raises NonFiniteResult naming the first
    layer whose output contains a NaN or infinity.
    """
    weights_io.check_weights(graph, wts)
    layers = ir.topo_sort(graph)
    deps = ir._resolve_producers(graph)
    input_tensor = np.asarray(input_tensor, dtype=np.float32)

    blobs = {}
    out = None
    for l in layers:
        ins = [blobs[p.name] for p in deps[l.name]]

        if l.kind == ir.KIND_DATA:
            want = (l.input_shape.ch, l.input_shape.h, l.input_shape.w)
            if input_tensor.shape != want:
                raise ShapeMismatch(
                    "input tensor %r does not match data layer %r shape %r"
                    % (input_tensor.shape, l.name, want),
                    layer=l.name)
            out = input_tensor
        elif l.kind == ir.KIND_CONV:
            e = wts[l.name]
            out = conv_layer(ins[0], e.filters, e.bias,
                             stride=l.conv.stride, pad=l.conv.pad,
                             order=order)
        elif l.kind == ir.KIND_RELU:
            out = relu(ins[0])
        elif l.kind == ir.KIND_POOLING:
            p = l.pool
            if p.global_pool:
                if p.op != ir.POOL_AVE:
                    raise UnsupportedLayer(
                        "global pooling is average-only, layer %r" % l.name,
                        layer=l.name)
                out = avg_pool_global(ins[0])
            elif p.op == ir.POOL_MAX:
                out = max_pool(ins[0], p.kernel, p.stride, p.pad)
            else:
                raise UnsupportedLayer(
                    "windowed average pooling not executable, layer %r"
                    % l.name, layer=l.name)
        elif l.kind == ir.KIND_CONCAT:
            out = concat(ins)
        elif l.kind == ir.KIND_DROPOUT:
            out = ins[0]
        elif l.kind == ir.KIND_SOFTMAX:
            out = softmax(ins[0])
        else:
            raise UnsupportedLayer(
                "layer %r of kind %r has no executable semantics"
                % (l.name, l.kind), layer=l.name)

        if not np.isfinite(out).all():
            raise NonFiniteResult(
                "layer %r produced non-finite values" % l.name, layer=l.name)
        blobs[l.name] = out
        if trace is not None:
            trace[l.name] = out.copy()

    return out
