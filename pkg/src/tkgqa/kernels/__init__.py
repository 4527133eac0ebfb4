"""Scoring kernel backends.

The hot kernels (single-fact scores and full-table candidate sweeps) come
in two interchangeable implementations: a compiled Cython extension and a
pure numpy fallback.  The active backend is chosen once at import time:

* ``TKGQA_KERNELS=compiled`` requires the extension (ImportError if absent),
* ``TKGQA_KERNELS=numpy`` forces the fallback,
* unset or ``auto`` prefers the extension when importable.

Both backends implement identical contracts and agree to float64 rounding;
``benchmarks/bench_kernels.py`` compares their speed.
"""

import logging
import os

from . import _numpy_backend

logger = logging.getLogger(__name__)

_choice = os.environ.get("TKGQA_KERNELS", "auto").lower()

if _choice not in ("auto", "compiled", "numpy"):
    raise ImportError(f"TKGQA_KERNELS must be auto|compiled|numpy, got {_choice!r}")

if _choice == "numpy":
    _active = _numpy_backend
else:
    try:
        from . import _scoring_c as _active  # type: ignore[no-redef]
    except ImportError:
        if _choice == "compiled":
            raise
        logger.info("compiled scoring kernels unavailable, using numpy fallback")
        _active = _numpy_backend

BACKEND = _active.NAME

score_single = _active.score_single
sweep_conj = _active.sweep_conj
sweep_plain = _active.sweep_plain
sweep_conj_batch = _active.sweep_conj_batch
sweep_plain_batch = _active.sweep_plain_batch


def available_backends():
    """Name -> module for every importable backend (for tests/benchmarks)."""
    backends = {"numpy": _numpy_backend}
    try:
        from . import _scoring_c

        backends["compiled"] = _scoring_c
    except ImportError:
        pass
    return backends
