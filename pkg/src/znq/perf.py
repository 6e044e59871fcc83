"""Cycle and throughput model of the accelerator schedule.

The machine processes iterations = h_out*w_out*ch_in input pixels per
layer. Each iteration runs the output channels through the PE array in
c = ceil(ch_out / n_pe) compute cycles. Two regimes:

* Ideal pipelining: pixel preload and compute overlap, so an iteration
  costs max(c, prefetch_latency) cycles, and output writeback hides
  behind compute. Weight preload still costs one cycle per word.
* Flushed pipeline: the synthesized design refills and drains the whole
  pipeline every iteration, costing 2*c + F0 cycles. F0 = 62 reproduces
  the observed 1-compute : 63-overhead and 2 : 64 ratios. Writeback no
  longer hides, so it is added, as is weight preload.

What-if knobs model the candidate improvements: fixing the flush,
shrinking the preload latency 9 -> 5, packing 9 output channels per
multiplier bank for 1x1 kernels (c = ceil(ch_out / (9*n_pe))), and a
16-bit fixed-point datapath that fits 5x the PEs (n_pe 16 -> 80; the
arithmetic itself is not simulated, only the capacity projection).
A what-if speedup compares against a baseline that keeps the scenario's
flush mode and clock but resets every other knob, which is how the
improvements were originally quoted (each measured on top of the flush
fix, not lumped together with it).
"""

import csv
import io
import math
from dataclasses import dataclass, field, replace

from . import accel


@dataclass
class WhatIfScenario:
    flush_fixed: bool = False
    prefetch_latency: int = None    # None: keep the architecture's value
    pack_1x1: bool = False
    fixed_point_16bit: bool = False
    clock_mhz: float = None         # None: keep the architecture's clock

    def __post_init__(self):
        if self.prefetch_latency is not None and self.prefetch_latency < 1:
            raise ValueError("prefetch latency must be at least 1 cycle")
        if self.clock_mhz is not None and not self.clock_mhz > 0:
            raise ValueError("clock must be positive")

    def to_json(self):
        return {
            "flush_fixed": self.flush_fixed,
            "prefetch_latency": self.prefetch_latency,
            "pack_1x1": self.pack_1x1,
            "fixed_point_16bit": self.fixed_point_16bit,
            "clock_mhz": self.clock_mhz,
        }


@dataclass
class LayerCycles:
    name: str
    iterations: int
    compute_cycles_per_iter: int
    ideal_cycles: int
    flushed_cycles: int
    weight_load_cycles: int
    writeback_cycles: int

    def to_json(self):
        return {
            "name": self.name,
            "iterations": self.iterations,
            "compute_cycles_per_iter": self.compute_cycles_per_iter,
            "ideal_cycles": self.ideal_cycles,
            "flushed_cycles": self.flushed_cycles,
            "weight_load_cycles": self.weight_load_cycles,
            "writeback_cycles": self.writeback_cycles,
        }


@dataclass
class CycleReport:
    per_layer: list
    ideal_total: int
    flushed_total: int
    slowdown_factor: float
    flushing: bool
    clock_mhz: float
    scenario: WhatIfScenario = field(default_factory=WhatIfScenario)

    @property
    def total_cycles(self):
        return self.flushed_total if self.flushing else self.ideal_total

    @property
    def t_frame_ms(self):
        return self.total_cycles / (self.clock_mhz * 1e3)

    @property
    def fps(self):
        return 1000.0 / self.t_frame_ms

    def to_json(self):
        return {
            "layers": [l.to_json() for l in self.per_layer],
            "ideal_total": self.ideal_total,
            "flushed_total": self.flushed_total,
            "slowdown_factor": self.slowdown_factor,
            "flushing": self.flushing,
            "clock_mhz": self.clock_mhz,
            "total_cycles": self.total_cycles,
            "t_frame_ms": self.t_frame_ms,
            "fps": self.fps,
            "scenario": self.scenario.to_json(),
        }


CSV_HEADER = ("name,iterations,cycles_per_iter,ideal_cycles,flushed_cycles,"
              "weight_load_cycles,writeback_cycles")


def to_csv(report):
    """Per-layer cycle table plus a TOTAL row, RFC-4180 quoted."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_HEADER.split(","))
    for l in report.per_layer:
        w.writerow([l.name, l.iterations, l.compute_cycles_per_iter,
                    l.ideal_cycles, l.flushed_cycles, l.weight_load_cycles,
                    l.writeback_cycles])
    w.writerow(["TOTAL",
                sum(l.iterations for l in report.per_layer), "",
                report.ideal_total, report.flushed_total,
                sum(l.weight_load_cycles for l in report.per_layer),
                sum(l.writeback_cycles for l in report.per_layer)])
    return buf.getvalue()


def schedule_layer(cfg, acc, flushing=False, pack_1x1=False):
    """Cycle record for one pass under the given architecture constants."""
    if pack_1x1 and cfg.k == 1:
        c = math.ceil(cfg.ch_out / (9 * acc.n_pe))
    else:
        c = math.ceil(cfg.ch_out / acc.n_pe)
    iterations = cfg.iterations
    weight_load = cfg.weight_words
    writeback = cfg.h_out * cfg.w_out * cfg.ch_out
    ideal = iterations * max(c, acc.prefetch_latency_cycles) + weight_load
    flushed = (iterations * (2 * c + acc.flush_base_cycles)
               + weight_load + writeback)
    return LayerCycles(
        name=cfg.name, iterations=iterations, compute_cycles_per_iter=c,
        ideal_cycles=ideal, flushed_cycles=flushed,
        weight_load_cycles=weight_load, writeback_cycles=writeback)


def _configs(net, acc):
    if isinstance(net, accel.CompiledNet):
        return net.layers
    if isinstance(net, (list, tuple)):
        return list(net)
    return accel.compile_network(net, acc).layers


def estimate_network(net, acc=None, scenario=None):
    """CycleReport for a compiled net (or graph) under a scenario."""
    acc = acc or accel.AcceleratorConfig()
    scenario = scenario or WhatIfScenario()
    eff = acc
    if scenario.fixed_point_16bit:
        eff = replace(eff, n_pe=eff.n_pe * 5)
    if scenario.prefetch_latency is not None:
        eff = replace(eff, prefetch_latency_cycles=scenario.prefetch_latency)
    clock = scenario.clock_mhz if scenario.clock_mhz else acc.clock_mhz

    per_layer = [schedule_layer(cfg, eff, flushing=not scenario.flush_fixed,
                                pack_1x1=scenario.pack_1x1)
                 for cfg in _configs(net, acc)]
    ideal = sum(l.ideal_cycles for l in per_layer)
    flushed = sum(l.flushed_cycles for l in per_layer)
    return CycleReport(
        per_layer=per_layer, ideal_total=ideal, flushed_total=flushed,
        slowdown_factor=flushed / ideal if ideal else float("nan"),
        flushing=not scenario.flush_fixed, clock_mhz=clock,
        scenario=scenario)


@dataclass
class WhatIfResult:
    baseline: CycleReport
    scenario: CycleReport
    speedup: float

    def to_json(self):
        return {
            "baseline": self.baseline.to_json(),
            "scenario": self.scenario.to_json(),
            "speedup": self.speedup,
        }


def whatif(net, acc=None, scenario=None):
    """Scenario run vs a baseline with the same flush mode and clock."""
    acc = acc or accel.AcceleratorConfig()
    scenario = scenario or WhatIfScenario()
    base = WhatIfScenario(flush_fixed=scenario.flush_fixed,
                          clock_mhz=scenario.clock_mhz)
    configs = _configs(net, acc)
    baseline = estimate_network(configs, acc, base)
    scn = estimate_network(configs, acc, scenario)
    return WhatIfResult(baseline=baseline, scenario=scn,
                        speedup=baseline.t_frame_ms / scn.t_frame_ms)
