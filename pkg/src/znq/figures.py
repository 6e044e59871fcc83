"""Report figures rendered next to the delimited output.

Pure file renderers over the report dataclasses; nothing here feeds back
into the numbers. Agg only, no display connection required.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt     # noqa: E402  (backend must be set first)


def _save(fig, path):
    fig.savefig(path, dpi=120)
    plt.close(fig)


def analysis_figure(report, path):
    """Per-module MACC and parameter bars for an AnalysisReport."""
    mods = report.per_module
    names = [m.name for m in mods]
    pos = range(len(mods))
    fig, (ax1, ax2) = plt.subplots(
        2, 1, figsize=(max(6.0, 0.55 * len(mods) + 2.0), 6.0), sharex=True)
    ax1.bar(pos, [m.macc / 1e6 for m in mods], color="#4878a8")
    ax1.set_ylabel("MMACC")
    ax1.set_title("compute and parameters per module")
    ax2.bar(pos, [m.params / 1e3 for m in mods], color="#a85448")
    ax2.set_ylabel("kparams")
    ax2.set_xticks(list(pos))
    ax2.set_xticklabels(names, rotation=45, ha="right")
    fig.tight_layout()
    _save(fig, path)


def estimate_figure(report, path):
    """Per-layer cycle bars (both pipeline regimes) for a CycleReport."""
    layers = report.per_layer
    names = [l.name for l in layers]
    pos = range(len(layers))
    fig, ax = plt.subplots(
        figsize=(7.5, max(4.0, 0.28 * len(layers) + 1.5)))
    ax.barh(pos, [l.flushed_cycles / 1e6 for l in layers],
            color="#c0c0c0", label="flushed")
    ax.barh(pos, [l.ideal_cycles / 1e6 for l in layers],
            color="#4878a8", label="pipelined")
    ax.set_yticks(list(pos))
    ax.set_yticklabels(names, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("Mcycles")
    ax.set_title("cycles per layer at %.0f MHz" % report.clock_mhz)
    ax.legend(loc="lower right")
    fig.tight_layout()
    _save(fig, path)
