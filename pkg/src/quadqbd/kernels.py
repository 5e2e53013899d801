"""Backend selection for the simulation kernels.

The compiled extension is used when it imports; otherwise the pure-Python
module with the same functions and identical output takes its place.
"""

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

OK, ABSORBED, ESCAPED, FULL = _pykernels.OK, _pykernels.ABSORBED, _pykernels.ESCAPED, _pykernels.FULL

DEFAULT = "compiled" if _ckernels is not None else "python"


def available() -> list:
    return ["compiled", "python"] if _ckernels is not None else ["python"]


def get(backend: str = "auto"):
    if backend == "auto":
        backend = DEFAULT
    if backend == "python":
        return _pykernels
    if backend == "compiled":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not built")
        return _ckernels
    raise ValueError(f"unknown backend {backend!r}")
