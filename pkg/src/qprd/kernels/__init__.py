"""Inner-loop stepping kernels.

Two interchangeable implementations of the same two-function contract:

    prepare(tables: dict) -> state        # one-time setup per propagator
    step_chunk(state, y, th1, th2, n)     # advance y in place by n steps

`_core` is the compiled (Cython) version; `pyref` is a pure numpy fallback
used when the extension is unavailable or when QPRD_FORCE_FALLBACK is set
(handy for debugging and for benchmarking the two against each other).
"""

import os

_forced = os.environ.get("QPRD_FORCE_FALLBACK", "").strip().lower()
if _forced not in ("", "0", "false", "no"):
    from . import pyref as impl
else:
    try:
        from . import _core as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import pyref as impl

IMPL_NAME: str = impl.IMPL_NAME

__all__ = ["impl", "IMPL_NAME"]
