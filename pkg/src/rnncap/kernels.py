"""Backend selection for the recurrence kernels.

The compiled extension is used when importable; ``RNNCAP_PURE_PYTHON=1``
forces the numpy fallback.  ``BACKEND`` names the active choice.
"""

import os

import numpy as np

from . import _fallback

RELU = 0
TANH = 1

_compiled = None
if os.environ.get("RNNCAP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def get_backend(name=None):
    """Module implementing ``forward_batch``/``backward_batch``."""
    name = name or BACKEND
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available; build with `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def forward_batch(U, W, X, kind, backend=None):
    mod = get_backend(backend)
    return mod.forward_batch(_c(U), _c(W), _c(X), int(kind))


def backward_batch(U, W, V, X, H, dY, kind, backend=None):
    mod = get_backend(backend)
    return mod.backward_batch(_c(U), _c(W), _c(V), _c(X), _c(H), _c(dY), int(kind))
