"""Hot-kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy implementations in ``_pykernels`` are used.  Setting the environment
variable ``PTCRYSTAL_PURE_PYTHON=1`` forces the fallback.
"""
import importlib
import os

_NAMES = ("apply_phase", "max_abs", "resolvent_nodes", "dp45_linear")


def load(name: str):
    """Return the kernel module for ``name`` in {"cython", "python"}."""
    if name == "cython":
        return importlib.import_module("ptcrystal._ckernels")
    if name == "python":
        return importlib.import_module("ptcrystal._pykernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available() -> list[str]:
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


if os.environ.get("PTCRYSTAL_PURE_PYTHON"):
    BACKEND = "python"
else:
    BACKEND = available()[0]

_mod = load(BACKEND)
apply_phase = _mod.apply_phase
max_abs = _mod.max_abs
resolvent_nodes = _mod.resolvent_nodes
dp45_linear = _mod.dp45_linear

__all__ = ["BACKEND", "available", "load", *_NAMES]
