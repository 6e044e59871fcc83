"""Command-line front end.

Subcommands mirror the library pipeline: analyze (operation/parameter
counts), infer (reference engine forward pass), simulate (cache-accurate
accelerator run), estimate (cycle model and what-if knobs), serve (the
JSON HTTP service). Exit code 0 on success, 1 on a diagnosed domain
error (printed to stderr), 2 on usage errors.
"""

import argparse
import os
import sys

import numpy as np

from . import (accel, analyzer, engine, errors, jsonio, perf, prototxt,
               weights)


def _load_graph(path):
    with open(path, "rb") as f:
        return prototxt.parse_bytes(f.read())


def _figure_companion(csv_path):
    stem, _ = os.path.splitext(csv_path)
    return stem + ".png"


def _resolve_weights(graph, spec_str, seed):
    """Weights from a container path, a random:<seed> ref, or a seed."""
    if seed is not None:
        return weights.random_weights(graph, seed)
    if spec_str.startswith("random:"):
        try:
            return weights.random_weights(graph, int(spec_str[7:], 0))
        except ValueError:
            raise errors.ZnqError("bad random weights ref %r" % spec_str)
    return weights.load_weights(spec_str)


def _cmd_analyze(args):
    graph = _load_graph(args.net)
    report = analyzer.analyze(graph)
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            f.write(analyzer.to_csv(report))
        if not args.no_fig:
            from . import figures
            figures.analysis_figure(report, _figure_companion(args.csv))
    if args.json:
        sys.stdout.write(jsonio.dumps(jsonio.analysis_doc(graph)))
    elif not args.csv:
        sys.stdout.write(analyzer.to_csv(report))
    return 0


def _cmd_infer(args):
    graph = _load_graph(args.net)
    wts = _resolve_weights(graph, args.weights or "", args.random_seed)
    x = weights.load_tensor(args.input)
    out = engine.run_network(graph, wts, x)
    if args.out:
        weights.save_tensor(args.out, out)
    flat = out.reshape(-1)
    top = np.argsort(flat)[::-1][:5]
    doc = {
        "output_shape": list(out.shape),
        "top": [{"index": int(i), "value": float(flat[i])} for i in top],
    }
    sys.stdout.write(jsonio.dumps(doc))
    return 0


def _cmd_simulate(args):
    graph = _load_graph(args.net)
    wts = _resolve_weights(graph, args.weights, None)
    x = weights.load_tensor(args.input)
    rep = accel.run_network(graph, wts, x)
    out = rep.output
    flat = out.reshape(-1)
    doc = {
        "output_shape": list(out.shape),
        "argmax": int(np.argmax(flat)),
    }
    if args.counters:
        doc["counters"] = {name: c.to_json()
                           for name, c in rep.counters.items()}
        doc["totals"] = rep.totals.to_json()
        doc["cache_peaks"] = {name: p.to_json()
                              for name, p in rep.peaks.items()}
    if args.verify:
        ref = engine.run_network(graph, wts, x)
        denom = np.maximum(np.abs(ref), np.float32(1e-30))
        doc["max_rel_error"] = float(
            (np.abs(out - ref) / denom).max())
    sys.stdout.write(jsonio.dumps(doc))
    return 0


def _parse_whatif(spec_str):
    """k=v,... text form of the scenario knobs."""
    fields = {}
    for part in spec_str.split(","):
        part = part.strip()
        if not part:
            continue
        key, eq, raw = part.partition("=")
        if not eq:
            raise ValueError("expected key=value in --whatif, got %r" % part)
        key = key.strip()
        raw = raw.strip().lower()
        if key in ("flush_fixed", "pack_1x1", "fixed_point_16bit"):
            if raw not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError("%s wants a boolean, got %r" % (key, raw))
            fields[key] = raw in ("true", "1", "yes")
        elif key == "prefetch_latency":
            fields[key] = int(raw)
        elif key == "clock_mhz":
            fields[key] = float(raw)
        else:
            raise ValueError("unknown what-if knob %r" % key)
    return fields


def _cmd_estimate(args):
    graph = _load_graph(args.net)
    net = accel.compile_network(graph)
    fields = _parse_whatif(args.whatif) if args.whatif else {}
    if args.no_flush:
        fields.setdefault("flush_fixed", True)
    if args.clock_mhz is not None:
        fields.setdefault("clock_mhz", args.clock_mhz)
    scenario = perf.WhatIfScenario(**fields)

    if args.whatif:
        res = perf.whatif(net, scenario=scenario)
        rep = res.scenario
        doc = jsonio.whatif_doc(res)
        summary = ("t_frame %.2f ms  fps %.2f  (baseline %.2f ms, "
                   "speedup %.3f)\n"
                   % (rep.t_frame_ms, rep.fps,
                      res.baseline.t_frame_ms, res.speedup))
    else:
        rep = perf.estimate_network(net, scenario=scenario)
        doc = jsonio.estimate_doc(rep)
        summary = ("t_frame %.2f ms  fps %.2f  (%s, %.0f MHz)\n"
                   % (rep.t_frame_ms, rep.fps,
                      "flushed" if rep.flushing else "pipelined",
                      rep.clock_mhz))
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            f.write(perf.to_csv(rep))
        if not args.no_fig:
            from . import figures
            figures.estimate_figure(rep, _figure_companion(args.csv))
    if args.json:
        sys.stdout.write(jsonio.dumps(doc))
    else:
        sys.stdout.write(summary)
    return 0


def _cmd_serve(args):
    from . import service
    httpd = service.make_server(args.bind, args.port)
    host, port = httpd.server_address[:2]
    print("serving on http://%s:%d" % (host, port), file=sys.stderr)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.server_close()
    return 0


def _default_port():
    try:
        return int(os.environ.get("ZNQ_PORT", "8177"))
    except ValueError:
        return 8177


def build_parser():
    p = argparse.ArgumentParser(
        prog="znq",
        description="CNN topology analyzer and FPGA accelerator simulator")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="count operations and parameters")
    a.add_argument("net", help="network description (prototxt)")
    a.add_argument("--csv", metavar="OUT", help="write the layer table here")
    a.add_argument("--json", action="store_true",
                   help="print the full report as JSON")
    a.add_argument("--no-fig", action="store_true",
                   help="skip the PNG companion next to --csv")
    a.set_defaults(func=_cmd_analyze)

    i = sub.add_parser("infer", help="run the reference engine")
    i.add_argument("net")
    i.add_argument("input", help="input tensor (.znqt)")
    ig = i.add_mutually_exclusive_group(required=True)
    ig.add_argument("--weights", help="weights container (.znqw)")
    ig.add_argument("--random-seed", type=int, metavar="N",
                    help="deterministic random weights instead of a file")
    i.add_argument("--out", help="write the output tensor here (.znqt)")
    i.set_defaults(func=_cmd_infer)

    s = sub.add_parser("simulate", help="run the accelerator simulation")
    s.add_argument("net")
    s.add_argument("weights", help=".znqw path or random:<seed>")
    s.add_argument("input", help="input tensor (.znqt)")
    s.add_argument("--counters", action="store_true",
                   help="include memory traffic counters and cache peaks")
    s.add_argument("--verify", action="store_true",
                   help="also run the reference engine and report the "
                        "max relative error")
    s.set_defaults(func=_cmd_simulate)

    e = sub.add_parser("estimate", help="cycle and throughput model")
    e.add_argument("net")
    e.add_argument("--clock-mhz", type=float, metavar="F")
    fl = e.add_mutually_exclusive_group()
    fl.add_argument("--flush", action="store_true",
                    help="model the flushed pipeline (default)")
    fl.add_argument("--no-flush", action="store_true",
                    help="model the ideally pipelined design")
    e.add_argument("--whatif", metavar="K=V,...",
                   help="scenario knobs: flush_fixed, prefetch_latency, "
                        "pack_1x1, fixed_point_16bit, clock_mhz")
    e.add_argument("--csv", metavar="OUT", help="write the cycle table here")
    e.add_argument("--json", action="store_true")
    e.add_argument("--no-fig", action="store_true")
    e.set_defaults(func=_cmd_estimate)

    v = sub.add_parser("serve", help="start the JSON HTTP service")
    v.add_argument("--port", type=int, default=_default_port(),
                   help="default from ZNQ_PORT, else 8177")
    v.add_argument("--bind", default="127.0.0.1")
    v.set_defaults(func=_cmd_serve)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else 2
    try:
        return args.func(args)
    except errors.ZnqError as e:
        print("error [%s]: %s" % (e.code, e.message), file=sys.stderr)
        span = getattr(e, "span", None)
        if span is not None:
            print("  at line %d col %d" % (span.line, span.col),
                  file=sys.stderr)
        return 1
    except OSError as e:
        print("error [IO]: %s" % e, file=sys.stderr)
        return 1
    except ValueError as e:
        print("error [BadRequest]: %s" % e, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
