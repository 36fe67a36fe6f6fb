"""Optional numba acceleration.

Hot per-sample loops are written once as plain Python over numpy arrays and
compiled with ``numba.njit`` when available.  Set ``VLEQ_DISABLE_NUMBA=1`` to
run the same source uncompiled (slow, but handy for debugging and for
checking that both paths agree).
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("VLEQ_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG not in ("", "0", "false", "no")

try:  # pragma: no cover - import guard
    import numba
except ImportError:  # pragma: no cover
    numba = None

USING_NUMBA = numba is not None and not NUMBA_DISABLED


def jit(fn):
    """Compile ``fn`` in nopython mode unless acceleration is off."""
    if not USING_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def pure(fn):
    """Return the uncompiled Python function behind a ``jit`` wrapper."""
    return getattr(fn, "py_func", fn)
