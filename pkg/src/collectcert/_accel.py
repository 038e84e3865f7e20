"""JIT toggling for the hot numeric kernels.

Numba compilation is on by default. Setting the environment variable
``COLLECTCERT_NO_NUMBA=1`` (or installing without numba) selects the
pure-numpy fallback implementations instead, which is useful for
debugging and for benchmarking the two paths against each other.
"""

import os

JIT_ENABLED = os.environ.get("COLLECTCERT_NO_NUMBA", "0") not in ("1", "true", "yes")

if JIT_ENABLED:
    try:
        from numba import njit
    except ImportError:
        JIT_ENABLED = False

if not JIT_ENABLED:

    def njit(func=None, **kwargs):
        if func is not None:
            return func

        def wrapper(f):
            return f

        return wrapper
