"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise the numpy port.
Set ``HDCOIN_PURE_PYTHON=1`` to force the numpy port. Both produce identical
integers, so the choice only affects speed.
"""
import contextlib
import os

from . import _kernels_py
from .errors import ConfigurationError

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

if _compiled is not None and not os.environ.get("HDCOIN_PURE_PYTHON"):
    _active = "compiled"
else:
    _active = "python"


def available_backends():
    return sorted(_BACKENDS)


def active_backend():
    return _active


def set_backend(name):
    global _active
    if name == "auto":
        name = "compiled" if "compiled" in _BACKENDS else "python"
    if name not in _BACKENDS:
        raise ConfigurationError(f"backend {name!r} not available (have {available_backends()})")
    _active = name


@contextlib.contextmanager
def use_backend(name):
    previous = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def item_signs(seed, offset, count):
    return _BACKENDS[_active].item_signs(seed, offset, count)


def encode_rows(levels, id_hvs, level_hvs):
    return _BACKENDS[_active].encode_rows(levels, id_hvs, level_hvs)


def class_sums(levels, labels, id_hvs, level_hvs, num_classes):
    return _BACKENDS[_active].class_sums(levels, labels, id_hvs, level_hvs, num_classes)


def query_dots(levels, id_hvs, level_hvs, class_hvs):
    return _BACKENDS[_active].query_dots(levels, id_hvs, level_hvs, class_hvs)
