"""smokesense: multimodal wildfire smoke detection.

Aligns weather-station measurements with tiled camera image sequences,
runs them through a spatiotemporal detector (per-tile conv encoder ->
recurrent temporal combiner -> transformer over tiles) with optional
weather fusion, trains it in two stages, and evaluates accuracy / F1 /
time-to-detection.

Heavy inner kernels run through numba when available; set
``SMOKESENSE_NUMBA=0`` to force the pure-numpy fallback path.
"""

__version__ = "0.1.0"

from smokesense.backend import numba_enabled

__all__ = ["numba_enabled", "__version__"]
