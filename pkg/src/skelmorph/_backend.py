"""Kernel backend selection.

The geometry kernels exist twice: a numba @njit implementation that walks the
BVH per query, and a vectorized pure-numpy brute-force implementation. The
env var SKELMORPH_BACKEND picks one at import time:

    SKELMORPH_BACKEND=numba   (default when numba imports cleanly)
    SKELMORPH_BACKEND=numpy   force the fallback

Both backends produce the same results up to floating-point reduction order;
the test suite asserts agreement and benchmarks/bench_kernels.py compares
throughput.
"""

import os

_requested = os.environ.get("SKELMORPH_BACKEND", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        "SKELMORPH_BACKEND must be 'numba' or 'numpy', got %r" % _requested
    )

if _requested == "numpy":
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if _requested == "numba":
            raise
        NUMBA_ENABLED = False


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
