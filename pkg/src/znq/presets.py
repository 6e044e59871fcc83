"""Bundled network descriptions shipped with the package."""

from importlib import resources

_NAMES = ("zynqnet", "toy")


def preset_names():
    return list(_NAMES)


def load_preset(name):
    """Return the text of a bundled network description."""
    if name not in _NAMES:
        raise KeyError("unknown preset %r; have %s" % (name, ", ".join(_NAMES)))
    ref = resources.files("znq").joinpath("data", name + ".prototxt")
    return ref.read_text(encoding="utf-8")
