"""Topology analyzer, bit-faithful behavioral simulator and cycle-accurate
performance model for an embedded FPGA CNN accelerator, plus the text-format
tooling (parser, serializer, presets) and CLI/HTTP front ends that tie them
together."""

__version__ = "0.1.0"
