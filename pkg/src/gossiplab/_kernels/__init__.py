"""Kernel backend selection: compiled extension when available, pure-Python
fallback otherwise. Both expose the same functions with identical semantics;
``gossiplab.engine`` threads an explicit backend through for testing and
benchmarking.
"""

from . import reference

try:
    from . import _core as compiled
except ImportError:  # extension not built
    compiled = None

DEFAULT = compiled if compiled is not None else reference


def get_backend(name=None):
    """Resolve a kernel backend by name: None/'auto', 'compiled', 'reference'."""
    if name is None or name == "auto":
        return DEFAULT
    if name == "reference":
        return reference
    if name == "compiled":
        if compiled is None:
            raise RuntimeError("compiled kernel is not available in this install")
        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")


def backend_name(mod=None) -> str:
    mod = mod or DEFAULT
    return "compiled" if getattr(mod, "COMPILED", False) else "reference"
