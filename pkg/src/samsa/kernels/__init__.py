"""Kernel backend selection.

The hot non-BLAS paths (top-k selection, row scatter-add) have a compiled
Cython implementation and a pure-numpy fallback with identical semantics.
The compiled one is used when built; set ``SAMSA_KERNELS=numpy`` to force
the fallback or ``SAMSA_KERNELS=c`` to require the extension.
"""

import os

from . import _numpy

_choice = os.environ.get("SAMSA_KERNELS", "auto").lower()
_impl = None
if _choice in ("auto", "c"):
    try:
        from . import _ckernels as _impl
    except ImportError:
        if _choice == "c":
            raise ImportError(
                "SAMSA_KERNELS=c but the compiled extension is not built; "
                "run `pip install -e . --no-build-isolation`"
            )
        _impl = None
elif _choice != "numpy":
    raise ValueError(f"SAMSA_KERNELS must be auto, c, or numpy, got {_choice!r}")

if _impl is None:
    _impl = _numpy

BACKEND = "numpy" if _impl is _numpy else "c"

topk_indices = _impl.topk_indices
scatter_add_rows = _impl.scatter_add_rows


def available_backends():
    """Map of backend name to module, for parity tests and benchmarks."""
    backends = {"numpy": _numpy}
    try:
        from . import _ckernels
        backends["c"] = _ckernels
    except ImportError:
        pass
    return backends
