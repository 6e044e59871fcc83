"""Cycle model tests.

The totals below were frozen from an independent spreadsheet-style pass
over the topology table (iterations = h_out*w_out*ch_in, c = ceil(co/16),
ideal = it*max(c, 9) + weights, flushed = it*(2c + 62) + weights + wb)
before perf.py existed. The published board measurements bracket them:
the flushed design was clocked at roughly 2 seconds per frame at 100 MHz
and the pipelined estimate at roughly 160 ms at 200 MHz.
"""

import math

import pytest
from hypothesis import given, settings, strategies as st

import topology_table as T
from znq import accel, perf, presets, prototxt

# Frozen ground truth for the default architecture (n_pe 16, prefetch 9,
# F0 62) over the 27 convolutions of the flagship network.
IDEAL_TOTAL = 23_903_776
FLUSHED_TOTAL = 152_852_000
ALLKNOBS_IDEAL = 12_850_720


def _zynqnet():
    g = prototxt.parse(presets.load_preset("zynqnet"))
    return accel.compile_network(g)


@pytest.fixture(scope="module")
def net():
    return _zynqnet()


def _cfg(name="l", k=1, s=1, ch_in=16, hw_in=8, ch_out=16):
    hw_out = hw_in // s
    return accel.AcceleratorLayerConfig(
        name=name, k=k, s=s, pad=k // 2, ch_in=ch_in, h_in=hw_in, w_in=hw_in,
        ch_out=ch_out, h_out=hw_out, w_out=hw_out,
        input_region="in", output_region="out", out_ch_total=ch_out,
        fuse_relu=True)


def test_flushed_ratio_one_compute_cycle():
    # One compute cycle per iteration costs 64 flushed cycles: 1 : 63.
    acc = accel.AcceleratorConfig()
    rec = perf.schedule_layer(_cfg(ch_out=16), acc, flushing=True)
    per_iter = (rec.flushed_cycles - rec.weight_load_cycles
                - rec.writeback_cycles) / rec.iterations
    assert per_iter == 64
    assert rec.compute_cycles_per_iter == 1


def test_flushed_ratio_two_compute_cycles():
    acc = accel.AcceleratorConfig()
    rec = perf.schedule_layer(_cfg(ch_out=32), acc, flushing=True)
    per_iter = (rec.flushed_cycles - rec.weight_load_cycles
                - rec.writeback_cycles) / rec.iterations
    assert per_iter == 66
    assert rec.compute_cycles_per_iter == 2


def test_ideal_floor_is_prefetch_latency():
    # c=4 < prefetch 9, so the preload dominates each iteration.
    acc = accel.AcceleratorConfig()
    rec = perf.schedule_layer(_cfg(ch_out=64), acc, flushing=False)
    per_iter = (rec.ideal_cycles - rec.weight_load_cycles) / rec.iterations
    assert per_iter == 9


def test_layer_record_hand_computed():
    # fire9/expand1x1: 8x8 out, 112 in, 368 out channels.
    cfg = [c for c in _zynqnet().layers if c.name == "fire9/expand1x1"][0]
    rec = perf.schedule_layer(cfg, accel.AcceleratorConfig())
    assert rec.iterations == 8 * 8 * 112
    assert rec.compute_cycles_per_iter == 23
    assert rec.weight_load_cycles == 112 * 368 + 368
    assert rec.writeback_cycles == 8 * 8 * 368
    assert rec.ideal_cycles == 7168 * 23 + 41_584
    assert rec.flushed_cycles == 7168 * (46 + 62) + 41_584 + 23_552


def test_totals_match_frozen_table(net):
    rep = perf.estimate_network(net)
    assert rep.ideal_total == IDEAL_TOTAL
    assert rep.flushed_total == FLUSHED_TOTAL
    assert len(rep.per_layer) == 27


def test_slowdown_factor(net):
    rep = perf.estimate_network(net)
    assert rep.slowdown_factor == pytest.approx(6.3945, abs=5e-4)
    # Published ratio between flushed board runs and the pipelined
    # estimate is about 6.2; the model must land within 20 %.
    assert 6.2 * 0.8 <= rep.slowdown_factor <= 6.2 * 1.2


def test_frame_time_flushed_100mhz(net):
    rep = perf.estimate_network(net)
    assert rep.flushing and rep.clock_mhz == 100.0
    assert rep.t_frame_ms == pytest.approx(1528.52, abs=0.01)
    assert abs(rep.t_frame_ms - 1955.0) <= 0.30 * 1955.0
    assert rep.fps == pytest.approx(0.654, abs=1e-3)


def test_frame_time_pipelined_200mhz(net):
    scn = perf.WhatIfScenario(flush_fixed=True, clock_mhz=200.0)
    rep = perf.estimate_network(net, scenario=scn)
    assert not rep.flushing
    assert rep.t_frame_ms == pytest.approx(119.52, abs=0.01)
    assert abs(rep.t_frame_ms - 158.0) <= 0.35 * 158.0
    assert 100.0 <= rep.t_frame_ms <= 200.0


def test_whatif_prefetch_shrink(net):
    scn = perf.WhatIfScenario(flush_fixed=True, prefetch_latency=5)
    res = perf.whatif(net, scenario=scn)
    assert res.scenario.ideal_total == 16_907_808
    assert res.speedup == pytest.approx(1.4138, abs=5e-4)
    assert 1.2 <= res.speedup <= 1.6


def test_whatif_pack_1x1(net):
    scn = perf.WhatIfScenario(flush_fixed=True, pack_1x1=True)
    res = perf.whatif(net, scenario=scn)
    assert res.scenario.ideal_total == 21_422_624
    assert res.speedup == pytest.approx(1.1158, abs=5e-4)
    assert 1.1 <= res.speedup <= 1.3


def test_whatif_all_knobs(net):
    scn = perf.WhatIfScenario(flush_fixed=True, prefetch_latency=5,
                              pack_1x1=True, fixed_point_16bit=True,
                              clock_mhz=200.0)
    rep = perf.estimate_network(net, scenario=scn)
    assert rep.ideal_total == ALLKNOBS_IDEAL
    assert rep.t_frame_ms == pytest.approx(64.25, abs=0.01)
    assert 10.0 <= rep.fps < 100.0
    assert rep.fps == pytest.approx(15.56, abs=0.01)


def test_fixed_point_widens_pe_array(net):
    scn = perf.WhatIfScenario(flush_fixed=True, fixed_point_16bit=True)
    rep = perf.estimate_network(net, scenario=scn)
    by_name = {l.name: l for l in rep.per_layer}
    # conv10 splits: ceil(512 / 80) = 7 instead of ceil(512 / 16) = 32.
    assert by_name["conv10/split1"].compute_cycles_per_iter == 7
    rep16 = perf.estimate_network(net)
    base = {l.name: l for l in rep16.per_layer}
    assert base["conv10/split1"].compute_cycles_per_iter == 32


def test_whatif_baseline_keeps_flush_and_clock(net):
    scn = perf.WhatIfScenario(flush_fixed=False, prefetch_latency=5,
                              clock_mhz=250.0)
    res = perf.whatif(net, scenario=scn)
    assert res.baseline.flushing and res.scenario.flushing
    assert res.baseline.clock_mhz == 250.0
    # Flushed totals do not depend on the prefetch latency at all.
    assert res.speedup == pytest.approx(1.0)


def test_largest_flushed_contributor(net):
    rep = perf.estimate_network(net)
    top = max(rep.per_layer, key=lambda l: l.flushed_cycles)
    assert top.name == "fire3/squeeze1x1"
    assert top.iterations == 64 * 64 * 128


def test_flushed_never_below_ideal(net):
    rep = perf.estimate_network(net)
    for l in rep.per_layer:
        assert l.flushed_cycles >= l.ideal_cycles
    assert rep.slowdown_factor >= 1.0


def test_clock_scales_frame_time(net):
    a = perf.estimate_network(net, scenario=perf.WhatIfScenario(clock_mhz=100))
    b = perf.estimate_network(net, scenario=perf.WhatIfScenario(clock_mhz=200))
    assert a.t_frame_ms == pytest.approx(2 * b.t_frame_ms)
    assert a.total_cycles == b.total_cycles


@settings(max_examples=60, deadline=None)
@given(ch_out=st.integers(1, 600), ch_in=st.integers(1, 64),
       hw=st.sampled_from([4, 8, 16]), k=st.sampled_from([1, 3]),
       pf_low=st.integers(1, 12), pf_delta=st.integers(0, 8))
def test_prefetch_monotonicity(ch_out, ch_in, hw, k, pf_low, pf_delta):
    cfg = _cfg(k=k, ch_in=ch_in, hw_in=hw, ch_out=ch_out)
    lo = accel.AcceleratorConfig(prefetch_latency_cycles=pf_low)
    hi = accel.AcceleratorConfig(prefetch_latency_cycles=pf_low + pf_delta)
    rlo = perf.schedule_layer(cfg, lo)
    rhi = perf.schedule_layer(cfg, hi)
    assert rlo.ideal_cycles <= rhi.ideal_cycles
    assert rlo.flushed_cycles == rhi.flushed_cycles
    assert rlo.flushed_cycles >= rlo.ideal_cycles


def test_pack_only_affects_1x1():
    acc = accel.AcceleratorConfig()
    one = _cfg(k=1, ch_out=144)
    three = _cfg(k=3, ch_out=144)
    assert perf.schedule_layer(one, acc, pack_1x1=True).compute_cycles_per_iter == 1
    assert (perf.schedule_layer(three, acc, pack_1x1=True).compute_cycles_per_iter
            == perf.schedule_layer(three, acc).compute_cycles_per_iter == 9)


def test_scenario_validation():
    with pytest.raises(ValueError):
        perf.WhatIfScenario(prefetch_latency=0)
    with pytest.raises(ValueError):
        perf.WhatIfScenario(clock_mhz=-5.0)


def test_csv_layout(net):
    rep = perf.estimate_network(net)
    lines = perf.to_csv(rep).split("\r\n")
    assert lines[0] == perf.CSV_HEADER
    assert lines[-1] == ""
    rows = [l.split(",") for l in lines[1:-1]]
    assert len(rows) == 28
    total = rows[-1]
    assert total[0] == "TOTAL"
    assert int(total[3]) == IDEAL_TOTAL
    assert int(total[4]) == FLUSHED_TOTAL
    body = rows[:-1]
    assert sum(int(r[3]) for r in body) == IDEAL_TOTAL


def test_report_json_roundtrippable(net):
    import json
    rep = perf.estimate_network(net)
    doc = json.loads(json.dumps(rep.to_json()))
    assert doc["ideal_total"] == IDEAL_TOTAL
    assert doc["flushed_total"] == FLUSHED_TOTAL
    assert doc["total_cycles"] == FLUSHED_TOTAL
    assert len(doc["layers"]) == 27
    assert doc["scenario"]["flush_fixed"] is False


def test_estimate_accepts_graph_and_configs(net):
    g = prototxt.parse(presets.load_preset("zynqnet"))
    a = perf.estimate_network(g)
    b = perf.estimate_network(net.layers)
    assert a.ideal_total == b.ideal_total == IDEAL_TOTAL
