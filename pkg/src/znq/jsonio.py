"""Canonical JSON rendering shared by the CLI and the HTTP service.

Both front ends funnel their payloads through dumps() so identical inputs
produce byte-identical JSON. Counts stay integers; only genuinely
fractional quantities (milliseconds, FPS, ratios) appear as floats.
"""

import json

from . import analyzer, ir, perf


def dumps(doc):
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def analysis_doc(graph):
    """Payload for `analyze --json` and POST /api/analyze."""
    report = analyzer.analyze(graph)
    doc = report.to_json()
    doc["diagnostics"] = [d.to_json() for d in ir.validate(graph)]
    return doc


def estimate_doc(report):
    return report.to_json()


def whatif_doc(result):
    return result.to_json()


def error_doc(exc):
    return {"error": exc.to_json()}


_SCENARIO_FIELDS = {
    "flush_fixed": bool,
    "prefetch_latency": int,
    "pack_1x1": bool,
    "fixed_point_16bit": bool,
    "clock_mhz": (int, float),
}


def scenario_from_json(obj):
    """Build a WhatIfScenario from a request payload, strictly typed."""
    if obj is None:
        return perf.WhatIfScenario()
    if not isinstance(obj, dict):
        raise ValueError("scenario must be an object")
    kwargs = {}
    for key, value in obj.items():
        want = _SCENARIO_FIELDS.get(key)
        if want is None:
            raise ValueError("unknown scenario field %r" % key)
        if value is None:
            continue
        # bool is an int subclass; reject true where a number is expected
        if want is not bool and isinstance(value, bool):
            raise ValueError("scenario field %r must be a number" % key)
        if not isinstance(value, want):
            raise ValueError("scenario field %r has the wrong type" % key)
        kwargs[key] = value
    return perf.WhatIfScenario(**kwargs)
