"""Backend selection for the hot numeric kernels.

Two interchangeable implementations exist for every kernel in
:mod:`smokesense.kernels`: a numba ``@njit`` version and a pure-numpy
fallback. Selection happens once at import time:

* ``SMOKESENSE_NUMBA=0`` (or ``false``/``no``) forces the numpy path.
* otherwise numba is used when it imports and compiles cleanly.

``numba_enabled()`` reports which path is live; the benchmark in
``benchmarks/bench_backends.py`` compares the two.
"""

from __future__ import annotations

import os

_FALSY = {"0", "false", "no", "off"}


def _env_wants_numba() -> bool:
    return os.environ.get("SMOKESENSE_NUMBA", "1").strip().lower() not in _FALSY


def _probe_numba() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


_NUMBA_ACTIVE = _env_wants_numba() and _probe_numba()


def numba_enabled() -> bool:
    """True when the numba kernel path was selected at import time."""
    return _NUMBA_ACTIVE
