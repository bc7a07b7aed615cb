"""Select the compiled kernels when available, else the numpy fallback.

Set ``FATMARGIN_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def get_backend(name=None):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name is None:
        forced = os.environ.get("FATMARGIN_PURE_PYTHON", "").lower() in ("1", "true", "yes")
        if forced or _ckernels is None:
            return _pykernels
        return _ckernels
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("fatmargin._ckernels is not built")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["python"] + (["cython"] if _ckernels is not None else [])


backend = get_backend()
BACKEND = backend.BACKEND
