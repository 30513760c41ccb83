"""Kernel backend selection.

Two interchangeable implementations exist: a compiled extension
(``_native``) and a pure-numpy fallback (``_numpy``). By default the
extension's bitmap-walk kernels (popcounts, member extraction, masked
counting) are used when built — those fuse the bit scan with the count and
beat numpy by an order of magnitude — while the predicate/pack kernels stay
on numpy, whose SIMD compare+packbits is already faster than a scalar loop
(see benchmarks/bench_kernels.py).

``CLFBOX_KERNELS=numpy|native`` forces one implementation wholesale; the
cross-check tests and the benchmark rely on that.
"""

from __future__ import annotations

import os

from . import _numpy

# kernels where the compiled walk wins; the rest stay vectorized numpy
_WALK_KERNELS = ("popcount", "popcount_and", "members", "masked_bincount", "confusion_counts")
_PACK_KERNELS = ("n_words", "zeros", "pack_mask", "filter_eq", "filter_range")


def _load_native():
    from . import _native  # noqa: PLC0415

    return _native


def available_backends() -> dict:
    """Importable backend modules keyed by name (for benchmarks/tests)."""
    backends = {"numpy": _numpy}
    try:
        backends["native"] = _load_native()
    except ImportError:
        pass
    return backends


def _select() -> tuple[str, dict]:
    forced = os.environ.get("CLFBOX_KERNELS", "").strip().lower()
    if forced == "numpy":
        return "numpy", {name: getattr(_numpy, name) for name in _WALK_KERNELS + _PACK_KERNELS}
    if forced == "native":
        native = _load_native()
        return "native", {name: getattr(native, name) for name in _WALK_KERNELS + _PACK_KERNELS}
    try:
        native = _load_native()
    except ImportError:
        return "numpy", {name: getattr(_numpy, name) for name in _WALK_KERNELS + _PACK_KERNELS}
    table = {name: getattr(native, name) for name in _WALK_KERNELS}
    table.update({name: getattr(_numpy, name) for name in _PACK_KERNELS})
    return "native", table


BACKEND, _TABLE = _select()

n_words = _TABLE["n_words"]
zeros = _TABLE["zeros"]
pack_mask = _TABLE["pack_mask"]
popcount = _TABLE["popcount"]
popcount_and = _TABLE["popcount_and"]
members = _TABLE["members"]
filter_eq = _TABLE["filter_eq"]
filter_range = _TABLE["filter_range"]
masked_bincount = _TABLE["masked_bincount"]
confusion_counts = _TABLE["confusion_counts"]
