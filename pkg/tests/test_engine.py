"""Reference executor against straight-line scalar oracles."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from znq import engine, ir, presets, prototxt, weights
from znq.errors import (
    MissingWeights,
    NonFiniteResult,
    ShapeMismatch,
    UnsupportedLayer,
)


def brute_conv(x, f, b, s, p, order="sequential", wide=False):
    # Independent scalar implementation: explicit loops, one accumulator
    # per output pixel, numpy scalars only so every step rounds in the
    # stated precision.
    ch_in, h_in, w_in = x.shape
    co, _, k, _ = f.shape
    h_out = (h_in + 2 * p - k) // s + 1
    w_out = (w_in + 2 * p - k) // s + 1
    t = np.float64 if wide else np.float32
    out = np.empty((co, h_out, w_out), np.float32)
    for c in range(co):
        for y in range(h_out):
            for xx in range(w_out):
                acc = t(0)
                for ci in range(ch_in):
                    prods = []
                    for j in range(k):
                        for i in range(k):
                            yy = s * y + j - p
                            xi = s * xx + i - p
                            if 0 <= yy < h_in and 0 <= xi < w_in:
                                v = t(x[ci, yy, xi])
                            else:
                                v = t(0)
                            prods.append(t(f[c, ci, j, i]) * v)
                    if order == "sequential":
                        for pr in prods:
                            acc = acc + pr
                    else:
                        while len(prods) > 1:
                            nxt = [prods[m] + prods[m + 1]
                                   for m in range(0, len(prods) - 1, 2)]
                            if len(prods) % 2:
                                nxt.append(prods[-1])
                            prods = nxt
                        acc = acc + prods[0]
                acc = acc + t(b[c])
                out[c, y, xx] = np.float32(acc)
    return out


def _rand(shape, seed):
    return np.random.RandomState(seed).uniform(-1, 1, shape).astype(
        np.float32)


def test_conv_scalar_case():
    x = np.full((1, 1, 1), 3.0, np.float32)
    f = np.full((1, 1, 1, 1), 2.0, np.float32)
    b = np.full(1, 0.5, np.float32)
    out = engine.conv_layer(x, f, b)
    assert out.shape == (1, 1, 1)
    assert out[0, 0, 0] == np.float32(6.5)


def test_conv_identity_kernel():
    x = _rand((1, 5, 7), 0)
    f = np.zeros((1, 1, 3, 3), np.float32)
    f[0, 0, 1, 1] = 1.0
    out = engine.conv_layer(x, f, np.zeros(1, np.float32), stride=1, pad=1)
    assert np.array_equal(out, x)


def test_conv_matches_brute_force_pinned_config():
    x = _rand((4, 6, 6), 1)
    f = _rand((3, 4, 3, 3), 2)
    b = _rand((3,), 3)
    got = engine.conv_layer(x, f, b, stride=2, pad=1)
    assert np.array_equal(got, brute_conv(x, f, b, 2, 1))
    wide = engine.conv_layer(x, f, b, stride=2, pad=1, wide_accumulate=True)
    assert np.array_equal(wide, brute_conv(x, f, b, 2, 1, wide=True))
    np.testing.assert_allclose(got, wide, rtol=1e-5, atol=1e-6)


def test_conv_accelerator_order_matches_brute_tree():
    x = _rand((3, 5, 5), 4)
    f = _rand((4, 3, 3, 3), 5)
    b = _rand((4,), 6)
    got = engine.conv_layer(x, f, b, stride=1, pad=1,
                            order=engine.ORDER_ACCELERATOR)
    assert np.array_equal(got, brute_conv(x, f, b, 1, 1, order="tree"))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4),
       st.integers(1, 8), st.integers(1, 8), st.sampled_from([1, 2, 3]),
       st.sampled_from([1, 2]), st.booleans(),
       st.sampled_from([engine.ORDER_SEQUENTIAL, engine.ORDER_ACCELERATOR]))
def test_conv_matches_brute_force_random(seed, ci, co, h, w, k, s, padded,
                                         order):
    p = k // 2 if padded else 0
    if h + 2 * p < k or w + 2 * p < k:
        return
    rng = np.random.RandomState(seed)
    x = rng.uniform(-2, 2, (ci, h, w)).astype(np.float32)
    f = rng.uniform(-2, 2, (co, ci, k, k)).astype(np.float32)
    b = rng.uniform(-2, 2, co).astype(np.float32)
    got = engine.conv_layer(x, f, b, stride=s, pad=p, order=order)
    want = brute_conv(
        x, f, b, s, p,
        order="sequential" if order == engine.ORDER_SEQUENTIAL else "tree")
    assert np.array_equal(got, want)


def test_conv_linearity():
    x = _rand((2, 6, 6), 7)
    f = _rand((3, 2, 3, 3), 8)
    zb = np.zeros(3, np.float32)
    base = engine.conv_layer(x, f, zb, pad=1)
    # power-of-two scale commutes exactly through float32
    doubled = engine.conv_layer(2 * x, f, zb, pad=1)
    assert np.array_equal(doubled, 2 * base)
    scaled = engine.conv_layer(np.float32(1.7) * x, f, zb, pad=1)
    # relative to layer scale: elements near zero cancel and carry no
    # meaningful relative error of their own
    scale = float(np.abs(1.7 * base).max())
    np.testing.assert_allclose(scaled, 1.7 * base, rtol=1e-6,
                               atol=1e-6 * scale)


def test_conv_translation():
    x = _rand((2, 8, 8), 9)
    f = _rand((3, 2, 3, 3), 10)
    b = _rand((3,), 11)
    out = engine.conv_layer(x, f, b, stride=1, pad=1)
    shifted_in = np.zeros_like(x)
    shifted_in[:, :, 1:] = x[:, :, :-1]
    shifted_out = engine.conv_layer(shifted_in, f, b, stride=1, pad=1)
    assert np.array_equal(shifted_out[:, 1:-1, 2:-1], out[:, 1:-1, 1:-2])


def test_conv_fuse_relu():
    x = _rand((2, 4, 4), 12)
    f = _rand((2, 2, 1, 1), 13)
    b = _rand((2,), 14)
    fused = engine.conv_layer(x, f, b, fuse_relu=True)
    assert np.array_equal(fused,
                          engine.relu(engine.conv_layer(x, f, b)))


def test_conv_shape_errors():
    x = _rand((2, 4, 4), 15)
    with pytest.raises(ShapeMismatch):
        engine.conv_layer(x, _rand((2, 3, 1, 1), 0), np.zeros(2, np.float32))
    with pytest.raises(ShapeMismatch):
        engine.conv_layer(x, _rand((2, 2, 1, 1), 0), np.zeros(3, np.float32))


def test_relu():
    out = engine.relu(np.array([-1.0, 0.0, 2.0], np.float32))
    assert np.array_equal(out, np.array([0.0, 0.0, 2.0], np.float32))


def test_max_pool_brute():
    x = _rand((3, 7, 7), 16)
    for k, s, p in [(2, 2, 0), (3, 2, 1), (3, 1, 0)]:
        got = engine.max_pool(x, k, s, p)
        ch, h_in, w_in = x.shape
        h_out = (h_in + 2 * p - k) // s + 1
        w_out = (w_in + 2 * p - k) // s + 1
        want = np.empty((ch, h_out, w_out), np.float32)
        for c in range(ch):
            for y in range(h_out):
                for xx in range(w_out):
                    m = -np.inf
                    for j in range(k):
                        for i in range(k):
                            yy, xi = s * y + j - p, s * xx + i - p
                            if 0 <= yy < h_in and 0 <= xi < w_in:
                                m = max(m, x[c, yy, xi])
                    want[c, y, xx] = m
        assert np.array_equal(got, want), (k, s, p)


def test_avg_pool_global_constant():
    x = np.full((5, 4, 4), 2.25, np.float32)
    out = engine.avg_pool_global(x)
    assert out.shape == (5, 1, 1)
    assert np.array_equal(out.ravel(), np.full(5, 2.25, np.float32))


def test_avg_pool_global_matches_sequential_scalar():
    x = _rand((3, 6, 5), 17)
    got = engine.avg_pool_global(x)
    for c in range(3):
        acc = np.float32(0)
        for y in range(6):
            for i in range(5):
                acc = acc + x[c, y, i]
        assert got[c, 0, 0] == acc / np.float32(30)


def test_concat_order_and_mismatch():
    a = _rand((2, 3, 3), 18)
    b = _rand((4, 3, 3), 19)
    out = engine.concat([a, b])
    assert out.shape == (6, 3, 3)
    assert np.array_equal(out[:2], a) and np.array_equal(out[2:], b)
    with pytest.raises(ShapeMismatch):
        engine.concat([a, _rand((2, 4, 3), 20)])


def test_softmax_properties():
    x = np.zeros((1024, 1, 1), np.float32)
    out = engine.softmax(x)
    assert np.allclose(out, 1.0 / 1024)
    logits = _rand((10, 1, 1), 21)
    p1 = engine.softmax(logits)
    assert p1.min() >= 0
    assert abs(float(p1.sum()) - 1.0) < 1e-5
    p2 = engine.softmax(logits + np.float32(3.5))
    assert np.argmax(p1) == np.argmax(p2)
    # large logits must not overflow thanks to max subtraction
    big = engine.softmax(np.array([200.0, 100.0], np.float32).reshape(2, 1, 1))
    assert np.isfinite(big).all() and big[0, 0, 0] > 0.99
    with pytest.raises(ShapeMismatch):
        engine.softmax(_rand((4, 2, 1), 22))


def _toy():
    return prototxt.parse(presets.load_preset("toy"))


def test_run_network_trace_and_dropout_identity():
    g = prototxt.parse(presets.load_preset("zynqnet"))
    w = weights.random_weights(g, 0)
    x = _rand((3, 256, 256), 23)
    trace = {}
    out = engine.run_network(g, w, x, trace=trace)
    assert out.shape == (1024, 1, 1)
    assert len(trace) == 65
    assert abs(float(out.sum()) - 1.0) < 1e-5
    assert np.array_equal(trace["drop9"], trace["fire9/concat"])


def test_run_network_zero_weights_uniform():
    g = prototxt.parse(presets.load_preset("zynqnet"))
    w = weights.random_weights(g, 0)
    for e in w.values():
        e.filters[:] = 0
    out = engine.run_network(g, w, _rand((3, 256, 256), 24))
    assert np.allclose(out, 1.0 / 1024)


def test_run_network_two_layer_closed_form():
    text = """
name: "tiny"
layer { name: "data" type: "Input"
  input_param { shape { dim: 1 dim: 2 dim: 1 dim: 1 } } }
layer { name: "fc" type: "Convolution" bottom: "data" top: "fc"
  convolution_param { num_output: 2 kernel_size: 1 } }
layer { name: "prob" type: "Softmax" bottom: "fc" top: "prob" }
"""
    g = prototxt.parse(text)
    f = np.array([[[[0.5]], [[1.0]]], [[[-1.0]], [[2.0]]]], np.float32)
    b = np.array([0.25, -0.5], np.float32)
    w = {"fc": weights.WeightEntry("fc", f, b)}
    x = np.array([2.0, 3.0], np.float32).reshape(2, 1, 1)
    out = engine.run_network(g, w, x)
    # logits by hand: [0.5*2 + 1*3 + 0.25, -1*2 + 2*3 - 0.5] = [4.25, 3.5]
    z = np.array([4.25, 3.5])
    want = np.exp(z - z.max()) / np.exp(z - z.max()).sum()
    np.testing.assert_allclose(out.ravel(), want, rtol=1e-6)


def test_run_network_orders_agree_within_tolerance():
    g = _toy()
    w = weights.random_weights(g, 5)
    x = _rand((3, 8, 8), 25)
    a = engine.run_network(g, w, x, order=engine.ORDER_SEQUENTIAL)
    b = engine.run_network(g, w, x, order=engine.ORDER_ACCELERATOR)
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-7)


def test_run_network_missing_weights():
    g = _toy()
    w = weights.random_weights(g, 0)
    del w["mix/wide3x3"]
    with pytest.raises(MissingWeights):
        engine.run_network(g, w, _rand((3, 8, 8), 26))


def test_run_network_input_shape_checked():
    g = _toy()
    w = weights.random_weights(g, 0)
    with pytest.raises(ShapeMismatch):
        engine.run_network(g, w, _rand((3, 9, 8), 27))


def test_run_network_nonfinite_names_layer():
    g = _toy()
    w = weights.random_weights(g, 0)
    w["conv1"].filters[:] = 3e38
    x = np.full((3, 8, 8), 3e38, np.float32)
    with pytest.raises(NonFiniteResult) as e, np.errstate(over="ignore"):
        engine.run_network(g, w, x)
    assert e.value.details.get("layer") == "conv1"


def test_run_network_windowed_avg_rejected():
    text = """
name: "t"
layer { name: "data" type: "Input"
  input_param { shape { dim: 1 dim: 1 dim: 4 dim: 4 } } }
layer { name: "p" type: "Pooling" bottom: "data" top: "p"
  pooling_param { pool: AVE kernel_size: 2 stride: 2 } }
"""
    g = prototxt.parse(text)
    with pytest.raises(UnsupportedLayer):
        engine.run_network(g, {}, np.zeros((1, 4, 4), np.float32))
