"""Kernel selection.

The compiled ``_kernels`` extension is used when it imports; otherwise the numpy
versions in ``_kernels_py`` are used. Set ``ADICMEAN_PURE_PYTHON=1`` to force the
fallback (the test suite runs both).

Only the per-digit scans come from the extension. The byte kernels (ASCII
parsing, 2-bit packing) are already memory-bound in numpy and the compiled
versions measured no faster (see benchmarks/bench_kernels.py).
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("ADICMEAN_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

checkpoint_counts = _impl.checkpoint_counts
prefix_codes = _impl.prefix_codes
parse_ascii = _kernels_py.parse_ascii
pack2 = _kernels_py.pack2
unpack2 = _kernels_py.unpack2

__all__ = [
    "BACKEND",
    "checkpoint_counts",
    "parse_ascii",
    "pack2",
    "unpack2",
    "prefix_codes",
]
